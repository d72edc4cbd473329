"""Moment-SOS hierarchy for polynomial matrix optimization.

Minimize ``f(x)`` subject to ``G(x)`` positive semidefinite, where ``G`` is
a symmetric matrix of polynomials.
"""
from pmo.hierarchy import ExtractionFailed, HierarchyOptions, HierarchyResult, run
from pmo.moment import AtomicMeasure, Tms, localizing_block, moment_matrix
from pmo.optimality import InfeasiblePoint, OptimalityReport, audit
from pmo.polyalg import PolyMatrix, Polynomial
from pmo.sdp import NotCertified, QmCertificate, certify_qm_membership
from pmo.sosconvex import is_sos_convex_negG, is_sos_convex_poly, solve_convex

__version__ = "0.1.0"

__all__ = [
    "ExtractionFailed", "HierarchyOptions", "HierarchyResult", "run",
    "AtomicMeasure", "Tms", "localizing_block", "moment_matrix",
    "InfeasiblePoint", "OptimalityReport", "audit",
    "PolyMatrix", "Polynomial",
    "NotCertified", "QmCertificate", "certify_qm_membership",
    "is_sos_convex_negG", "is_sos_convex_poly", "solve_convex",
]
