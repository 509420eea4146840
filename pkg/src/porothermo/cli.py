"""Command-line front end: check, simulate, verify, report."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import AdmissibilityError
from .config import ConfigError, load_config, resolve_config, scenario_from_config
from .kernel import default_grid, dissipativity_check
from .material import derive_constants, validate_material
from .measures import (face_to_node, surface_measures, verify_decay, write_decay_report,
                       write_energy_csv, write_measures_csv)
from .simulator import InstabilityError, Simulator, Trajectory

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNSTABLE = 0, 1, 2, 3
MANIFEST = "manifest.json"


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _parse_sigma(text: str | None):
    if text is None:
        return None
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse --sigma {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise ConfigError("--sigma needs positive values")
    return vals


def _apply_overrides(cfg: dict, sigma, refine: int) -> dict:
    cfg = resolve_config(cfg)
    if sigma is not None:
        cfg["sigma"] = sigma
    if refine:
        if refine < 0:
            raise ConfigError("--refine must be nonnegative")
        cfg["grid"]["N"] = int(cfg["grid"]["N"]) * 2**refine
    return cfg


# -- check -------------------------------------------------------------------


def cmd_check(args) -> int:
    sc = scenario_from_config(load_config(args.path))
    mat = validate_material(sc.material)
    ker = dissipativity_check(sc.kernel, default_grid(sc.kernel, t_max=max(sc.T, 1.0)))
    out = {"material": mat.to_dict(), "kernel": ker.to_dict()}
    ok = mat.passed and ker.passed
    if ok:
        out["constants"] = derive_constants(sc.material, sc.kernel).to_dict()
    print(json.dumps(out, indent=2, sort_keys=True))
    if not ok:
        names = [v["name"] for part in ("material", "kernel") for v in out[part]["violations"]]
        print("inadmissible: " + "; ".join(names), file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# -- simulate ----------------------------------------------------------------


def _write_states(traj: Trajectory, outdir: Path) -> list[dict]:
    written = []
    x = traj.grid.x
    for k, n in enumerate(traj.output_indices()):
        q = face_to_node(traj.q[n])
        q[0] = traj.q_bc[n]
        name = f"state_{k}.csv"
        with open(outdir / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "u", "v", "phi", "phidot", "theta", "q"])
            for i in range(x.size):
                w.writerow([repr(float(v)) for v in (x[i], traj.u[n, i], traj.v[n, i], traj.phi[n, i],
                                                      traj.w[n, i], traj.theta[n, i], q[i])])
        written.append({"file": name, "t": float(traj.t[n]), "step": int(n)})
    return written


def _simulate(cfg: dict, outdir: Path) -> tuple[Trajectory, dict]:
    sc = scenario_from_config(cfg)
    sim = Simulator(sc)
    traj = sim.run()
    outdir.mkdir(parents=True, exist_ok=True)
    states = _write_states(traj, outdir)
    manifest = {
        "tool": "porothermo",
        "version": __version__,
        "config": sc.raw,
        "grid": {"L": sc.L, "N": sc.N, "dx": sim.grid.dx},
        "dt": traj.dt,
        "n_steps": traj.n_steps,
        "zeta": traj.constants.zeta,
        "constants": traj.constants.to_dict(),
        "support": {"x0": traj.support.x0, "radii": list(traj.support.radii)},
        "flux_check": {"max_residual": traj.max_flux_residual,
                       "max_abs_q": float(np.abs(traj.q).max(initial=0.0))},
        "states": states,
        "files": {s["file"]: _digest(outdir / s["file"]) for s in states},
    }
    _write_manifest(outdir, manifest)
    return traj, manifest


def _write_manifest(outdir: Path, manifest: dict) -> None:
    with open(outdir / MANIFEST, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(args) -> int:
    if not args.output:
        raise ConfigError("simulate needs -o DIR")
    cfg = _apply_overrides(load_config(args.path), _parse_sigma(args.sigma), args.refine)
    traj, _ = _simulate(cfg, Path(args.output))
    print(f"wrote {traj.n_steps} steps (dt={traj.dt:.6g}) to {args.output}")
    return EXIT_OK


# -- verify ------------------------------------------------------------------


def cmd_verify(args) -> int:
    path = Path(args.path)
    sigma = _parse_sigma(args.sigma)
    if path.is_dir():
        outdir = path
        mpath = outdir / MANIFEST
        if not mpath.exists():
            raise ConfigError(f"{outdir} holds no {MANIFEST}; run simulate first")
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
        recorded = dict(manifest["files"])
        cfg = _apply_overrides(manifest["config"], None, 0)
        # the integrator is deterministic, so a rerun reproduces the stored states
        traj, manifest = _simulate(cfg, outdir)
        stale = [f for f, d in recorded.items() if f.startswith("state_") and manifest["files"].get(f) != d]
        if stale:
            print(f"stored states do not reproduce: {', '.join(sorted(stale))}", file=sys.stderr)
            return EXIT_FAIL
    else:
        if not args.output:
            raise ConfigError("verify on a config file needs -o DIR")
        outdir = Path(args.output)
        cfg = _apply_overrides(load_config(path), sigma, args.refine)
        traj, manifest = _simulate(cfg, outdir)

    sigmas = sigma if sigma is not None else list(traj.scenario.sigma)
    ms = surface_measures(traj, sigmas)
    report = verify_decay(traj, sigmas, measures=ms)
    write_measures_csv(outdir / "measures.csv", traj, ms)
    write_energy_csv(outdir / "energy.csv", traj)
    write_decay_report(outdir / "decay_report.json", report)
    for name in ("measures.csv", "energy.csv", "decay_report.json"):
        manifest["files"][name] = _digest(outdir / name)
    manifest["verify"] = {"sigma": sigmas, "passed": report.passed}
    _write_manifest(outdir, manifest)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  value={c.value:.3e}")
    if not report.passed:
        print("failed: " + "; ".join(c.name for c in report.failures()), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# -- report ------------------------------------------------------------------


def _read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {h: body[:, i] for i, h in enumerate(head)}


def cmd_report(args) -> int:
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "porothermo"
    src = Path(args.path)
    out = Path(args.output) if args.output else src
    out.mkdir(parents=True, exist_ok=True)
    for need in (MANIFEST, "measures.csv"):
        if not (src / need).exists():
            raise ConfigError(f"{src} lacks {need}; run simulate and verify first")
    manifest = json.loads((src / MANIFEST).read_text(encoding="utf-8"))
    zeta = manifest["zeta"]
    x0 = manifest["support"]["x0"]
    m = _read_csv(src / "measures.csv")
    meta = {"Date": None}
    written = []

    for s in np.unique(m["sigma"]):
        fig, ax = plt.subplots(figsize=(6, 4))
        sel = m["sigma"] == s
        for t in np.unique(m["t"][sel]):
            if t == 0:
                continue
            row = sel & (m["t"] == t)
            ax.plot(m["r"][row], m["I"][row], marker="o", ms=3, label=f"t={t:.2f}")
        ax.set_xlabel("r")
        ax.set_ylabel("I(r, t)")
        ax.set_title(f"time-weighted surface power, sigma={s:g}")
        ax.legend(fontsize=7)
        name = f"I_sigma_{s:g}.svg"
        fig.savefig(out / name, format="svg", metadata=meta)
        plt.close(fig)
        written.append(name)

    sel = m["sigma"] == m["sigma"][0]
    t_end = m["t"][sel].max()
    row = sel & (m["t"] == t_end)
    r, Q = m["r"][row], m["Q"][row]
    Q0 = Q[np.argmin(r)]
    rr = np.linspace(0, zeta * t_end, 100)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(r, Q, "o-", label="Q(r, T)")
    ax.plot(rr, (1 - rr / (zeta * t_end)) * Q0, "--", label="(1 - r/(zeta T)) Q(0, T)")
    ax.set_xlabel("r")
    ax.set_ylabel("Q")
    ax.legend()
    fig.savefig(out / "Q_bound.svg", format="svg", metadata=meta)
    plt.close(fig)
    written.append("Q_bound.svg")

    states = manifest["states"]
    ts = np.array([s["t"] for s in states])
    mags = []
    for s in states:
        st = _read_csv(src / s["file"])
        mags.append(np.abs(st["v"]) + np.abs(st["phidot"]) + np.abs(st["theta"]))
    x = st["x"]
    mag = np.log10(np.maximum(np.array(mags), 1e-30))
    fig, ax = plt.subplots(figsize=(6, 4))
    pc = ax.pcolormesh(x, ts, mag, shading="nearest", vmin=-16, vmax=max(mag.max(), -15))
    fig.colorbar(pc, ax=ax, label="log10(|v| + |phidot| + |theta|)")
    ax.plot(x0 + zeta * ts, ts, "w--", label="x = x0 + zeta t")
    ax.set_xlim(x[0], x[-1])
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.legend(loc="lower right")
    fig.savefig(out / "cone.svg", format="svg", metadata=meta)
    plt.close(fig)
    written.append("cone.svg")
    print("wrote " + ", ".join(written))
    return EXIT_OK


# -- entry -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="porothermo", description=__doc__)
    p.add_argument("command", choices=("check", "simulate", "verify", "report"))
    p.add_argument("path", help="config JSON (check, simulate, verify) or run directory (verify, report)")
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("--sigma", help="comma-separated weights for the time-weighted measure")
    p.add_argument("--refine", type=int, default=0, help="multiply the cell count by 2**k")
    return p


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "verify": cmd_verify, "report": cmd_report}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except AdmissibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InstabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())
