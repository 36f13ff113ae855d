"""48-slot/8-pole IPM machine geometry benchmark and the BNH test problem.

The ten geometric constraints follow the parametric rotor/stator model of a
V-shaped single-layer magnet IPM machine. Lengths are in mm, angles in
degrees; every trigonometric call converts to radians exactly where the
formula does.

The expensive FEA objectives are replaced by ``proxy_objectives``, a fixed
analytic stand-in ("proxy-v1") with conflicting torque-like and
pulsation-like terms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from machopt.problem import DEGENERATE_SENTINEL, BoundsSpec, Problem

# Machine constants (mm / counts).
OS_SN = 48.0
IM_PN = 8.0
OS_ID = 161.9
AG_L = 0.75
IM_ID = 110.0
ZIM_UV = 1.0
IM_V1 = 0.0
IM_W2 = 0.7
OS_WS1 = 3.34
OS_H1 = 0.27
ZOS_UV = 1.0

VARIABLES = (
    ("x1", "Height of rotor pole cap", "mm"),
    ("x2", "Magnet thickness", "mm"),
    ("x3", "Magnet width", "mm"),
    ("x4", "Angle between magnets", "degree"),
    ("x5", "Bridge height", "mm"),
    ("x6", "Q-axis width", "mm"),
    ("x7", "Slot height", "mm"),
    ("x8", "Slot width", "mm"),
    ("x9", "Height of slot opening", "mm"),
    ("x10", "Width of slot opening", "mm"),
)

X_LOWER = np.array([7.65, 5.73, 14.30, 116.28, 1.59, 11.12, 24.72, 5.35, 0.98, 1.50])
X_UPPER = np.array([11.47, 8.59, 21.46, 174.42, 2.39, 16.68, 37.08, 8.03, 1.46, 2.26])
X_REF = np.array([9.56, 7.16, 17.88, 145.35, 1.99, 13.9, 30.9, 6.69, 1.22, 1.88])
IPM_BOUNDS = BoundsSpec(X_LOWER, X_UPPER)

INTERMEDIATE_NAMES = (
    "IM_OD", "ZIM_VE", "ZIM_OR", "ZOS_Y3", "ZOS_VE",
    "ZIM_X1", "ZIM_Y1", "ZIM_X2", "ZIM_X4", "ZIM_Y4",
    "ZIM_X5", "ZIM_Y5", "ZIM_X7", "ZIM_Y7", "ZIM_X8",
    "ZIM_Y8", "ZIM_K1", "ZIM_K2", "ZOS_V1A", "ZOS_V1B", "ZOS_V1",
)  # fmt: skip

# g10 forms: the web between magnet corner 5 and point 7 along the magnet
# edge must be at least 0.1 mm.  ``G10_PRINTED`` divides the x-offset by the
# half-angle in radians instead of by its cosine.
G10_EDGE = 0
G10_PRINTED = 1
G10_FORMS = {"edge": G10_EDGE, "printed": G10_PRINTED}

_D2R = math.pi / 180.0
_R2D = 180.0 / math.pi


@numba.njit(cache=True, nogil=True)
def _intermediates(x):
    """Geometry intermediates in INTERMEDIATE_NAMES order; NaN = undefined.

    Also returns the two radicands so degeneracy can be quantified.
    """
    m = np.full(21, np.nan)
    im_od = OS_ID - 2.0 * AG_L
    zim_ve = 180.0 * ZIM_UV / IM_PN
    zim_or = im_od / 2.0
    zos_y3 = OS_WS1 / 2.0
    zos_ve = 180.0 * ZOS_UV / OS_SN
    m[0] = im_od
    m[1] = zim_ve
    m[2] = zim_or
    m[3] = zos_y3
    m[4] = zos_ve

    half = (x[3] / 2.0) * _D2R
    s_half = math.sin(half)
    c_half = math.cos(half)
    t_half = math.tan((x[3] / 2.0 + IM_V1) * _D2R)
    t_ve = math.tan(zim_ve * _D2R)
    c_ve = math.cos(zim_ve * _D2R)

    zim_x2 = zim_or - x[0]
    m[7] = zim_x2
    zos_v1a = x[6] - x[7] / 2.0 - x[8] - OS_H1
    m[18] = zos_v1a
    rad_v1b = zos_v1a**2 - ((x[7] / 2.0) ** 2 - zos_y3**2)
    if rad_v1b >= 0.0:
        zos_v1b = math.sqrt(rad_v1b)
        m[19] = zos_v1b
        m[20] = (2.0 * math.atan2(zos_v1a - zos_v1b, x[7] / 2.0 + zos_y3)) * _R2D
    if s_half != 0.0:
        m[5] = zim_x2 - x[1] / s_half
    m[6] = 0.0
    rad_y8 = np.nan
    if zim_x2 != 0.0:
        zim_x8 = ((zim_or - x[4]) ** 2 - (x[2] + IM_W2) ** 2 + zim_x2**2) / (2.0 * zim_x2)
        m[14] = zim_x8
        rad_y8 = (zim_or - x[4]) ** 2 - zim_x8**2
        if rad_y8 >= 0.0:
            m[15] = math.sqrt(rad_y8)
    zim_x4 = zim_x2 + x[2] * c_half
    zim_y4 = x[2] * s_half
    zim_x5 = zim_x4 - x[1] * s_half
    zim_y5 = zim_y4 + x[1] * c_half
    m[8] = zim_x4
    m[9] = zim_y4
    m[10] = zim_x5
    m[11] = zim_y5
    zim_k1 = zim_y5 + x[5] / (2.0 * c_ve) - zim_x5 * t_half
    zim_k2 = t_ve - t_half
    m[16] = zim_k1
    m[17] = zim_k2
    if zim_k2 != 0.0:
        zim_x7 = zim_k1 / zim_k2
        m[12] = zim_x7
        m[13] = zim_x7 * t_ve - x[5] / (2.0 * c_ve)
    return m, rad_v1b, rad_y8


@numba.njit(cache=True, nogil=True)
def _penalty_value(radicand):
    if np.isnan(radicand) or radicand >= 0.0:
        return DEGENERATE_SENTINEL
    return DEGENERATE_SENTINEL + abs(radicand)


@numba.njit(cache=True, nogil=True)
def _constraints(x, g10_form):
    m, rad_v1b, rad_y8 = _intermediates(x)
    g = np.empty(10)
    degenerate = False
    im_od = m[0]
    zos_ve = m[4]
    x1_, y1_, x4_, y4_ = m[5], m[6], m[8], m[9]
    x5_, y5_, x7_, y7_ = m[10], m[11], m[12], m[13]
    x8_, y8_, v1 = m[14], m[15], m[20]

    if np.isnan(x1_):
        g[0] = DEGENERATE_SENTINEL
        degenerate = True
    else:
        g[0] = -(math.sqrt(x1_**2 + y1_**2) - (IM_ID / 2.0 + 2.0))
    g[1] = math.sqrt(x4_**2 + y4_**2) - (im_od / 2.0 - 1.0)
    if np.isnan(x7_):
        g[2] = DEGENERATE_SENTINEL
        g[3] = DEGENERATE_SENTINEL
        g[4] = DEGENERATE_SENTINEL
        g[9] = DEGENERATE_SENTINEL
        degenerate = True
    else:
        g[2] = -(x7_ - x5_)
        g[3] = -(y7_ - y5_)
        g[4] = math.sqrt(x7_**2 + y7_**2) - (im_od / 2.0 - x[4] - 1.0)
        half = (x[3] / 2.0) * _D2R
        denom = math.cos(half) if g10_form == G10_EDGE else half
        if denom == 0.0:
            g[9] = DEGENERATE_SENTINEL
            degenerate = True
        else:
            g[9] = -((x7_ - x5_) / denom - 0.1)
    if np.isnan(x8_):
        g[5] = DEGENERATE_SENTINEL
        degenerate = True
    else:
        g[5] = x8_ - x4_ - 3.0
    if np.isnan(y8_):
        g[6] = _penalty_value(rad_y8)
        degenerate = True
    else:
        g[6] = y8_ - y4_ - 1.0
    g[7] = -(OS_WS1 - x[9])
    if np.isnan(v1):
        g[8] = _penalty_value(rad_v1b)
        degenerate = True
    else:
        g[8] = abs(v1 - zos_ve) - zos_ve
    return g, degenerate


@numba.njit(cache=True, nogil=True)
def ipm_g_edge(x):
    return _constraints(x, G10_EDGE)[0]


@numba.njit(cache=True, nogil=True)
def ipm_g_printed(x):
    return _constraints(x, G10_PRINTED)[0]


@dataclass(frozen=True)
class GeometryIntermediates:
    values: dict[str, float]

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    @property
    def defined_mask(self) -> dict[str, bool]:
        return {k: not math.isnan(v) for k, v in self.values.items()}

    @property
    def all_defined(self) -> bool:
        return all(self.defined_mask.values())


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (10,):
        raise ValueError(f"IPM geometry needs a length-10 vector, got shape {x.shape}")
    return x


def compute_intermediates(x) -> GeometryIntermediates:
    m, _, _ = _intermediates(_as_vector(x))
    return GeometryIntermediates(dict(zip(INTERMEDIATE_NAMES, (float(v) for v in m))))


def ipm_constraints(x, g10_form: str = "edge") -> tuple[np.ndarray, bool]:
    """Return ``(g, degenerate)`` for the ten geometric constraints."""
    g, degenerate = _constraints(_as_vector(x), G10_FORMS[g10_form])
    return g, bool(degenerate)


def proxy_objectives(x) -> np.ndarray:
    """Analytic proxy-v1 objectives in minimization form ``(-torque, pulsation)``.

    Not derived from FEA. Larger slots raise both the pseudo-torque and the
    pseudo-pulsation so the two objectives conflict; beyond 220 mm^2 of slot
    area a saturation term bends the torque back down. A larger bridge
    height lowers torque and raises pulsation.
    """
    x = _as_vector(x)
    s4 = math.sin(x[3] * math.pi / 360.0)
    a_slot = x[6] * x[7]
    a_mag = x[1] * x[2]
    excess = max(0.0, a_slot - 220.0)
    tau = 0.020 * a_mag * s4 * (1.0 - 0.08 * x[4]) + 0.15 * a_slot - 0.60 * excess**2 / 100.0
    pulse = 0.45 * excess + 9.0 * abs(x[8] * x[9] - 2.30) + 320.0 / (x[2] * s4 + 1.0) + 2.5 * x[4]
    return np.array([-tau, pulse])


def ipm_problem(g10_form: str = "edge") -> Problem:
    """The IPM proxy benchmark: maximize pseudo-torque, minimize pseudo-pulsation."""
    if g10_form not in G10_FORMS:
        raise ValueError(f"unknown g10 form {g10_form!r}; choose from {sorted(G10_FORMS)}")
    kernel = ipm_g_edge if g10_form == "edge" else ipm_g_printed
    name = "ipm-proxy-v1" if g10_form == "edge" else "ipm-proxy-v1-printed-g10"
    return Problem(
        name=name,
        bounds=IPM_BOUNDS,
        # proxy_objectives is already in minimization form; undo for raw.
        objective_fn=lambda x: proxy_objectives(x) * np.array([-1.0, 1.0]),
        constraint_fn=lambda x: ipm_constraints(x, g10_form),
        maximize=(True, False),
        constraint_kernel=kernel,
        n_constraints=10,
        variable_names=tuple(v[0] for v in VARIABLES),
        objective_names=("avg_torque", "torque_pulsation"),
    )


def export_bounds_csv(path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variable", "description", "unit", "reference", "lower", "upper"])
        for (name, desc, unit), ref, lo, hi in zip(VARIABLES, X_REF, X_LOWER, X_UPPER):
            writer.writerow([name, desc, unit, f"{ref:.2f}", f"{lo:.2f}", f"{hi:.2f}"])


# ------------------------------------------------------------------------ BNH


@numba.njit(cache=True, nogil=True)
def bnh_g(x):
    g = np.empty(2)
    g[0] = (x[0] - 5.0) ** 2 + x[1] ** 2 - 25.0
    g[1] = 7.7 - (x[0] - 8.0) ** 2 - (x[1] + 3.0) ** 2
    return g


def bnh_objectives(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.array([4.0 * x[0] ** 2 + 4.0 * x[1] ** 2, (x[0] - 5.0) ** 2 + (x[1] - 5.0) ** 2])


def bnh_problem() -> Problem:
    """Binh-Korn constrained bi-objective benchmark, both objectives minimized."""
    return Problem(
        name="bnh",
        bounds=BoundsSpec(np.array([0.0, 0.0]), np.array([5.0, 3.0])),
        objective_fn=bnh_objectives,
        constraint_fn=lambda x: (bnh_g(np.asarray(x, dtype=float)), False),
        maximize=(False, False),
        constraint_kernel=bnh_g,
        n_constraints=2,
    )


REGISTRY = {
    "ipm-proxy-v1": ipm_problem,
    "ipm-proxy-v1-printed-g10": lambda: ipm_problem("printed"),
    "bnh": bnh_problem,
}


def get_problem(name: str) -> Problem:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; registered: {', '.join(sorted(REGISTRY))}") from None
    return factory()
