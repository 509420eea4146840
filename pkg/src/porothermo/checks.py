"""Pass/fail containers shared by the material and kernel checks."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Violation:
    name: str
    margin: float


@dataclass(frozen=True)
class AdmissibilityReport:
    """``passed`` is true exactly when ``violations`` is empty."""

    passed: bool
    eigenvalues: tuple[float, ...] = ()
    violations: tuple[Violation, ...] = ()

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "eigenvalues": list(self.eigenvalues),
            "violations": [asdict(v) for v in self.violations],
        }


class AdmissibilityError(ValueError):
    """Material or kernel data violate a thermodynamic restriction."""
