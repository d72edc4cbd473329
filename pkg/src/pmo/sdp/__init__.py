"""Semidefinite programs: canonical form, relaxations, certificates, solvers."""
from pmo.sdp.backends import SolveOptions, get_backend, register_backend, solve
from pmo.sdp.problem import (INFEASIBLE, MAX_ITER, NUMERICAL_TROUBLE, OPTIMAL, UNBOUNDED,
                             PsdBlock, SdpProblem, SdpSolution, residuals)
from pmo.sdp.relax import (NotCertified, QmCertificate, assemble_moment_relaxation,
                           assemble_sos_relaxation, certify_qm_membership, min_order)

__all__ = [
    "SolveOptions", "get_backend", "register_backend", "solve",
    "INFEASIBLE", "MAX_ITER", "NUMERICAL_TROUBLE", "OPTIMAL", "UNBOUNDED",
    "PsdBlock", "SdpProblem", "SdpSolution", "residuals",
    "NotCertified", "QmCertificate", "assemble_moment_relaxation",
    "assemble_sos_relaxation", "certify_qm_membership", "min_order",
]
