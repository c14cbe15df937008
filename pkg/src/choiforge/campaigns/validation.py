"""
Validation of found maps.
Re-derives every claim a successful run makes about its Choi matrix
(certificate values, spectral implications, block positivity, structural
constraints) and collects violations as findings with a severity.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from choiforge.choi.choi_matrix import ChoiMatrix
from choiforge.choi.probe import block_positivity_probe
from choiforge.optimizer.xi import bound_report
from choiforge.sdp.certificates import CertificateEngine
from choiforge.sdp.conic import SolverOptions

logger = logging.getLogger(__name__)


class ValidationSeverity(Enum):
    """Validation finding severity levels"""

    CRITICAL = "critical"  # contradicts a certificate
    HIGH = "high"  # claim not met
    INFO = "info"


class ValidationSettings(BaseModel):
    """Thresholds shared by every check of one report"""

    epsilon: float = Field(default=0.05, gt=0, description="Non-decomposability margin")
    k: int = Field(default=2, ge=2, description="Positivity certificate level")
    probe_samples: int = Field(default=10_000, ge=1, description="See-saw starting points")
    seesaw_iters: int = Field(default=20, ge=0, description="See-saw refinements per start")
    zeta_tol: float = Field(default=1e-6, gt=0, description="Slack on zeta_1 against -epsilon")
    probe_tol: float = Field(default=1e-6, gt=0, description="Slack on the probe minimum")
    tp_tol: float = Field(default=1e-12, gt=0, description="TP residual bound")
    probe_seed: int = Field(default=0, ge=0, description="Probe random seed")


@dataclass
class ValidationFinding:
    """One failed or informational check"""

    check: str
    severity: ValidationSeverity
    message: str
    details: Dict[str, Any] = field(default_factory=dict)


@dataclass
class ValidationReport:
    """Measured quantities for one Choi matrix plus the findings against them"""

    values: Dict[str, Any]
    findings: List[ValidationFinding]
    non_decomposable: bool
    solved: bool = True

    @property
    def passed(self) -> bool:
        return not any(f.severity is not ValidationSeverity.INFO for f in self.findings)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "non_decomposable": self.non_decomposable,
            "solved": self.solved,
            "values": self.values,
            "findings": [
                {
                    "check": f.check,
                    "severity": f.severity.value,
                    "message": f.message,
                    "details": f.details,
                }
                for f in self.findings
            ],
        }


def mask_residual(choi: ChoiMatrix, mask: Optional[np.ndarray]) -> float:
    """Largest magnitude at a masked-out entry; 0 for unmasked maps"""
    if mask is None:
        return 0.0
    outside = np.abs(choi.array[~np.asarray(mask, dtype=bool)])
    return float(outside.max()) if outside.size else 0.0


def validate_found_map(
    choi: ChoiMatrix,
    settings: Optional[ValidationSettings] = None,
    mask: Optional[np.ndarray] = None,
    solver_options: Optional[SolverOptions] = None,
    engine: Optional[CertificateEngine] = None,
    require_non_decomposable: bool = True,
) -> ValidationReport:
    """
    Check a Choi matrix against what a successful run claims about it.

    Args:
        choi: Choi matrix of the found map
        settings: Thresholds and probe budget
        mask: Structural mask the map was trained with
        solver_options: Solver settings for a fresh engine
        engine: Certificate engine to reuse
        require_non_decomposable: Treat zeta_1 above -epsilon as a failure
            (off for bound-mode finds, which may be decomposable)

    Returns:
        ValidationReport; solver failures show up as findings, never raise
    """
    settings = settings or ValidationSettings()
    engine = engine or CertificateEngine(solver_options)
    cert_tol = engine.options.cert_tol
    findings: List[ValidationFinding] = []

    cert1 = engine.zeta(choi, 1)
    certk = engine.zeta(choi, settings.k)
    lam_c = choi.min_eigenvalue()
    lam_pt = choi.min_eigenvalue_pt()
    probe_min, _ = block_positivity_probe(
        choi,
        settings.probe_samples,
        settings.seesaw_iters,
        np.random.default_rng(settings.probe_seed),
    )
    values: Dict[str, Any] = {
        "d_in": choi.d_in,
        "d_out": choi.d_out,
        "zeta1": cert1.value,
        "zeta1_margin": -cert1.value,
        f"zeta{settings.k}": certk.value,
        "lambda_min": lam_c,
        "lambda_min_pt": lam_pt,
        "probe_min": probe_min,
        "tp_residual": choi.tp_residual(),
        "mask_residual": mask_residual(choi, mask),
        "max_imag": float(np.abs(choi.array.imag).max()),
    }

    for cert in (cert1, certk):
        if not cert.ok:
            findings.append(
                ValidationFinding(
                    f"zeta{cert.k}",
                    ValidationSeverity.HIGH,
                    f"zeta_{cert.k} solve ended with status {cert.status.value}",
                )
            )

    non_decomposable = bool(cert1.ok and cert1.value < -cert_tol)
    if cert1.ok and cert1.value > -settings.epsilon + settings.zeta_tol:
        findings.append(
            ValidationFinding(
                "zeta1",
                ValidationSeverity.HIGH if require_non_decomposable else ValidationSeverity.INFO,
                f"zeta_1 = {cert1.value:.3e} is above -epsilon = {-settings.epsilon}",
                {"epsilon": settings.epsilon, "tolerance": settings.zeta_tol},
            )
        )
    if certk.ok and certk.value < -cert_tol:
        findings.append(
            ValidationFinding(
                f"zeta{settings.k}",
                ValidationSeverity.HIGH,
                f"zeta_{settings.k} = {certk.value:.3e} does not certify positivity",
            )
        )

    # A negative PPT certificate excludes PSD C and PSD C^{T_B}
    if non_decomposable and not (lam_c < 0 and lam_pt < 0):
        findings.append(
            ValidationFinding(
                "spectrum",
                ValidationSeverity.CRITICAL,
                "Negative zeta_1 with a PSD Choi matrix or PSD partial transpose",
                {"lambda_min": lam_c, "lambda_min_pt": lam_pt},
            )
        )
    if probe_min < -settings.probe_tol:
        severity = (
            ValidationSeverity.CRITICAL
            if certk.ok and certk.value >= -cert_tol
            else ValidationSeverity.HIGH
        )
        findings.append(
            ValidationFinding(
                "block_positivity",
                severity,
                f"Product vector with negative expectation {probe_min:.3e}",
                {"samples": settings.probe_samples},
            )
        )
    if choi.tp and values["tp_residual"] > settings.tp_tol:
        findings.append(
            ValidationFinding(
                "trace_preservation",
                ValidationSeverity.HIGH,
                f"TP residual {values['tp_residual']:.3e} above {settings.tp_tol}",
            )
        )
    if values["mask_residual"] != 0.0:
        findings.append(
            ValidationFinding(
                "mask",
                ValidationSeverity.HIGH,
                f"Masked entries reach {values['mask_residual']:.3e}",
            )
        )
    if choi.real and values["max_imag"] != 0.0:
        findings.append(
            ValidationFinding(
                "real", ValidationSeverity.HIGH, "Real map has imaginary Choi entries"
            )
        )

    if choi.d_in == choi.d_out:
        report = bound_report(choi)
        values.update(
            {
                "transfer_trace": report.trace,
                "transfer_min_real": report.min_real,
                "xi": report.xi,
                "bound": report.verdict,
            }
        )
        if report.violated:
            findings.append(
                ValidationFinding(
                    "bound",
                    ValidationSeverity.INFO,
                    f"Spectral bound violated, xi = {report.xi:.6f}",
                    {"degenerate": report.degenerate},
                )
            )

    result = ValidationReport(values, findings, non_decomposable, solved=cert1.ok and certk.ok)
    logger.info(
        f"Validated {choi.d_in}x{choi.d_out} map: {'passed' if result.passed else 'failed'}",
        extra={"findings": len(findings), "zeta1": cert1.value},
    )
    return result
