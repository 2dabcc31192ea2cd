"""Entropic transport of tensor-valued measures.

Fields are passed as ``(points, tensors)`` with ``points`` of shape (n, k)
and ``tensors`` of shape (n, d, d), symmetric positive semidefinite.
"""

from ._qot import (
    FormatError,
    barycenter,
    distance,
    exp_sym,
    interpolate,
    load_field,
    log_sym,
    pointwise_barycenter,
    render_svg,
    save_field,
    sinkhorn_solve,
)

__all__ = [
    "FormatError",
    "barycenter",
    "distance",
    "exp_sym",
    "interpolate",
    "load_field",
    "log_sym",
    "pointwise_barycenter",
    "render_svg",
    "save_field",
    "sinkhorn_solve",
]
