"""Material data, admissibility checks and the derived decay constants.

Coefficients are those of a linear thermoelastic material with voids reduced
to one space dimension.  In 1D every tensor coefficient collapses to a scalar,
so the major/minor symmetries of C, D, A, B, M and of the conductivity kernel
hold trivially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Union

import numpy as np

from .checks import AdmissibilityError, AdmissibilityReport, Violation

Coefficient = Union[float, np.ndarray]

FIELD_NAMES = ("rho", "chi", "c", "theta0", "C", "A", "xi", "D", "B", "b", "Mc", "a", "m")
POSITIVE_FIELDS = ("rho", "chi", "c", "theta0")


@dataclass(frozen=True)
class MaterialParams:
    """Pointwise constitutive coefficients.

    Each field is either a scalar (uniform body) or an array of per-node
    samples; suprema and infima are taken over the samples.

    rho, chi, c, theta0 : density, equilibrated inertia, specific heat and
        reference temperature (all > 0).
    C, A, xi : elastic, equilibrated-stress and intrinsic moduli.
    D, B, b : strain/porosity coupling moduli.
    Mc, a, m : thermal couplings of stress, equilibrated stress and
        intrinsic force.

    The 1D reduction makes the tensor symmetries C_ijrs = C_rsij = C_jirs,
    D_ijr = D_jir, A_ij = A_ji, B_ij = B_ji, M_ij = M_ji automatic.
    """

    rho: Coefficient = 1.0
    chi: Coefficient = 1.0
    c: Coefficient = 1.0
    theta0: Coefficient = 1.0
    C: Coefficient = 1.0
    A: Coefficient = 1.0
    xi: Coefficient = 1.0
    D: Coefficient = 0.2
    B: Coefficient = 0.2
    b: Coefficient = 0.2
    Mc: Coefficient = 0.1
    a: Coefficient = 0.1
    m: Coefficient = 0.1

    @classmethod
    def from_dict(cls, data: dict) -> "MaterialParams":
        unknown = set(data) - set(FIELD_NAMES)
        if unknown:
            raise ValueError(f"unknown material keys: {sorted(unknown)}")
        kwargs = {}
        for k, v in data.items():
            kwargs[k] = np.asarray(v, dtype=float) if isinstance(v, (list, tuple)) else float(v)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = np.asarray(v).tolist() if np.ndim(v) else float(v)
        return out

    def sampled(self, name: str) -> np.ndarray:
        return np.atleast_1d(np.asarray(getattr(self, name), dtype=float))

    @property
    def is_uniform(self) -> bool:
        return all(np.ndim(getattr(self, n)) == 0 for n in FIELD_NAMES)

    def on_nodes(self, n_nodes: int) -> dict[str, np.ndarray]:
        """Broadcast every coefficient to ``n_nodes`` samples."""
        out = {}
        for name in FIELD_NAMES:
            v = self.sampled(name)
            if v.size == 1:
                v = np.full(n_nodes, v[0])
            elif v.size != n_nodes:
                raise ValueError(
                    f"coefficient {name!r} has {v.size} samples, grid has {n_nodes} nodes"
                )
            out[name] = v
        return out


@dataclass(frozen=True)
class DerivedConstants:
    mu_M: np.ndarray = field(repr=False)
    mu: float
    bigM: float
    K_M: float
    K0: float
    eps0: float
    zeta: float
    rho0: float

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "bigM": self.bigM,
            "K_M": self.K_M,
            "K0": self.K0,
            "eps0": self.eps0,
            "zeta": self.zeta,
            "rho0": self.rho0,
        }


def coupling_matrix(p: MaterialParams) -> np.ndarray:
    """Gram matrix of the stored-energy form in coordinates (F, sqrt(chi) pi, psi).

    Returns shape (3, 3) for uniform parameters, (n, 3, 3) for sampled ones.
    """
    chi = p.sampled("chi")
    if np.any(chi <= 0):
        raise ValueError("chi must be positive to weight the porosity gradient")
    arrs = np.broadcast_arrays(*(p.sampled(n) for n in ("C", "A", "xi", "D", "B", "b")), chi)
    C, A, xi, D, B, b, chi = arrs
    s = np.sqrt(chi)
    G = np.empty(C.shape + (3, 3))
    G[..., 0, 0] = C
    G[..., 1, 1] = A / chi
    G[..., 2, 2] = xi
    G[..., 0, 1] = G[..., 1, 0] = D / s
    G[..., 0, 2] = G[..., 2, 0] = B
    G[..., 1, 2] = G[..., 2, 1] = b / s
    return G[0] if p.is_uniform else G


def validate_material(p: MaterialParams) -> AdmissibilityReport:
    violations = []
    for name in POSITIVE_FIELDS:
        v = p.sampled(name)
        if np.any(v <= 0):
            violations.append(Violation(f"{name} nonpositive", float(v.min())))
    eig: tuple[float, ...] = ()
    if not any(v.name == "chi nonpositive" for v in violations):
        G = coupling_matrix(p)
        lam = np.linalg.eigvalsh(G)
        if lam.ndim == 1:
            eig = tuple(float(x) for x in lam[::-1])
            lam_min = lam[0]
        else:
            # report the spectrum at the least definite sample
            worst = int(np.argmin(lam[:, 0]))
            eig = tuple(float(x) for x in lam[worst, ::-1])
            lam_min = lam[worst, 0]
        if lam_min <= 0:
            violations.append(Violation("coupling form not positive definite", float(lam_min)))
    return AdmissibilityReport(passed=not violations, eigenvalues=eig, violations=tuple(violations))


def epsilon0_root(mu: float, bigM: float, K0: float) -> float:
    """Nonnegative root of eps^2 - eps*(-1 + (K0 + M)/mu) - M/mu = 0."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if bigM < 0 or K0 < 0:
        raise ValueError("bigM and K0 must be nonnegative")
    beta = -1.0 + (K0 + bigM) / mu
    gamma = bigM / mu
    disc = math.sqrt(beta * beta + 4.0 * gamma)
    if beta >= 0:
        return 0.5 * (beta + disc)
    if gamma == 0.0:
        return 0.0
    # beta < 0: rationalised form avoids cancellation
    return 2.0 * gamma / (disc - beta)


def epsilon0_closed_form(mu: float, bigM: float, K0: float) -> float:
    """The same root written as 1 + eps0 = 1/2 + (K0+M)/(2mu) + sqrt(...)."""
    half = (K0 + bigM) / (2.0 * mu)
    return 0.5 + half + math.sqrt((half - 0.5) ** 2 + bigM / mu) - 1.0


def derive_constants(p: MaterialParams, k) -> DerivedConstants:
    report = validate_material(p)
    if not report.passed:
        names = ", ".join(v.name for v in report.violations)
        raise AdmissibilityError(f"inadmissible material: {names}")
    from .kernel import default_grid, dissipativity_check

    kreport = dissipativity_check(k, default_grid(k, t_max=1.0))
    if not kreport.passed:
        names = ", ".join(v.name for v in kreport.violations)
        raise AdmissibilityError(f"inadmissible kernel: {names}")

    G = coupling_matrix(p)
    mu_M = np.atleast_1d(np.linalg.eigvalsh(G)[..., -1])
    mu = float(mu_M.max())

    rho, chi, c, theta0 = (p.sampled(n) for n in POSITIVE_FIELDS)
    Mc, a, m = (p.sampled(n) for n in ("Mc", "a", "m"))
    bigM = float(np.max(theta0 / (rho * c) * (Mc**2 + a**2 / chi + m**2)))
    K_M = float(k.value(0.0))
    K0 = float(np.max(theta0 * K_M / c))
    eps0 = epsilon0_root(mu, bigM, K0)
    rho0 = float(rho.min())
    zeta = math.sqrt((1.0 + eps0) * mu / rho0)
    return DerivedConstants(mu_M=mu_M, mu=mu, bigM=bigM, K_M=K_M, K0=K0, eps0=eps0, zeta=zeta, rho0=rho0)
