"""JSON codecs for matrices, algebras and reports."""

import json
import math
from typing import Any, List

import numpy as np

from cstarpert.core.algebra import Subalgebra
from cstarpert.utils.config import DEFAULT_TOLERANCES
from cstarpert.utils.exceptions import DimensionMismatch, PreconditionFailed


def matrix_to_json(m: np.ndarray) -> dict:
    """{"dim": n, "re": rows, "im": rows}."""
    m = np.asarray(m, dtype=np.complex128)
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(data: dict) -> np.ndarray:
    """
    Inverse of matrix_to_json.

    Raises:
        DimensionMismatch: If the arrays do not have shape (dim, dim)
    """
    dim = int(data["dim"])
    m = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    if m.shape != (dim, dim):
        raise DimensionMismatch((dim, dim), m.shape)
    return m


def subalgebra_to_json(alg: Subalgebra) -> dict:
    return {"ambient_dim": alg.ambient_dim, "basis": [matrix_to_json(b) for b in alg.basis]}


def subalgebra_from_json(data: dict) -> Subalgebra:
    """
    Inverse of subalgebra_to_json.

    Raises:
        DimensionMismatch: If a basis element is not ambient_dim x ambient_dim
        PreconditionFailed: If the basis is empty or not HS-orthonormal
    """
    dim = int(data["ambient_dim"])
    if not data["basis"]:
        raise PreconditionFailed("subalgebra basis is empty")
    basis = np.array([matrix_from_json(b) for b in data["basis"]])
    if basis.shape[1:] != (dim, dim):
        raise DimensionMismatch(dim, basis.shape[1])
    flat = basis.reshape(basis.shape[0], -1)
    defect = float(np.max(np.abs(np.conj(flat) @ flat.T - np.eye(len(flat)))))
    if defect > DEFAULT_TOLERANCES.closure:
        raise PreconditionFailed(f"subalgebra basis is not HS-orthonormal (defect {defect:.3e})")
    return Subalgebra(ambient_dim=dim, basis=basis)


def expectation_to_json(e) -> dict:
    m = np.asarray(e.matrix)
    return {
        "source": subalgebra_to_json(e.source),
        "target": subalgebra_to_json(e.target),
        "matrix": {"rows": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()},
    }


def quasi_basis_to_json(qb) -> dict:
    return {
        "elements": [matrix_to_json(u) for u in qb.elements],
        "index": matrix_to_json(qb.index_element),
        "unit_ball": bool(qb.in_unit_ball),
    }


def module_operator_to_json(op) -> dict:
    return {"matrix": matrix_to_json(op.matrix), "module_hash": op.module.content_hash()}


def bounds_to_json(bounds) -> List[dict]:
    return [b.to_dict() for b in bounds]


def distance_to_json(estimate) -> dict:
    return {
        "lower": estimate.lower,
        "upper": estimate.upper,
        "method_notes": estimate.method_notes,
    }


def perturbation_report_to_json(report, include_timings: bool = False) -> dict:
    data = {
        "unitary": matrix_to_json(report.unitary),
        "d_estimate": distance_to_json(report.d_estimate),
        "psi_bound": {
            "lhs": report.psi_bound_lhs,
            "rhs": report.psi_bound_rhs,
            "certified_lhs": report.psi_bound_certified,
        },
        "u_bound": {"lhs": report.u_bound_lhs, "rhs": report.u_bound_rhs},
        "conjugation_residual": report.conjugation_residual,
        "u_commutes_with_c_residual": report.u_commutes_with_c_residual,
        "u_in_generated_residual": report.u_in_generated_residual,
        "n_quasi_basis": report.n_quasi_basis,
        "gamma": report.gamma,
        "gamma_satisfied": report.gamma_satisfied,
        "delta": report.delta,
        "s_gap": report.s_gap,
        "bounds": bounds_to_json(report.bounds),
    }
    if include_timings:
        data["timings"] = dict(report.timings)
    return data


def cluster_report_to_json(report) -> dict:
    distances = [
        [None if math.isnan(x) else float(x) for x in row] for row in np.asarray(report.jones_distances)
    ]
    return {
        "classes": report.classes,
        "epsilon": report.epsilon,
        "jones_distances": distances,
        "pairs": [
            {
                "i": p.i,
                "j": p.j,
                "jones_distance": None if math.isnan(p.jones_distance) else p.jones_distance,
                "within_epsilon": p.within_epsilon,
                "attempted": p.attempted,
                "status": p.status,
                "detail": p.detail,
                "conjugation_residual": p.conjugation_residual,
            }
            for p in report.pairs
        ],
    }


def _default(obj: Any):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return matrix_to_json(obj) if obj.ndim == 2 else obj.tolist()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def dumps(data: Any) -> str:
    """Stable JSON text (sorted keys) for reports."""
    return json.dumps(data, sort_keys=True, indent=2, default=_default)
