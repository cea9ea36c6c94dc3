"""
Scalar functionals of states and trajectories.

Energy and the smoothed ("modified") energy, the exact commutator form of
its time derivative, space-time Strichartz and local-energy norms, the
high-frequency long-time bundle S(M), and the bilinear products it controls.

Quadrature conventions: spatial integrals are the grid trapezoid rule
(exact against the spectral pairing for grid fields), time integrals are the
trapezoid rule over trajectory snapshots.  Radial suprema over ball radii
are taken over dyadic radii only; the same sampling is used on both sides of
every ratio check, so trends are unaffected.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .evolve import Trajectory
from .grid import (
    FOUR_PI,
    RadialField,
    State,
    ball_mass,
    l2_pairing,
    quartic_integral,
    radial_derivative,
    to_spectral,
)
from .multiplier import MultiplierSpec, apply_multiplier, sobolev_norm

TIMESERIES_FORMAT_VERSION = 1


@dataclass
class DiagnosticsRecord:
    """Per-snapshot functional values; norms and energies must be >= 0."""

    t: float
    energy: float
    modified_energy: Dict[Tuple[float, float], float] = field(default_factory=dict)
    sobolev: Dict[float, float] = field(default_factory=dict)
    extras: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        vals = [self.t, self.energy, *self.modified_energy.values(), *self.sobolev.values(), *self.extras.values()]
        if not np.all(np.isfinite(vals)):
            raise ValueError("diagnostics values must be finite")
        if self.energy < 0 or any(v < 0 for v in self.modified_energy.values()):
            raise ValueError("defocusing energies are nonnegative")
        if any(v < 0 for v in self.sobolev.values()):
            raise ValueError("norms are nonnegative")

    def to_row(self) -> Dict[str, float]:
        row = {"t": self.t, "energy": self.energy}
        for (N, s), v in self.modified_energy.items():
            row[modified_energy_label(N, s)] = v
        for s, v in self.sobolev.items():
            row[sobolev_label(s)] = v
        row.update(self.extras)
        return row


@dataclass
class NormBundle:
    """The long-time quantity S(M) together with its constituent terms."""

    strichartz_l4: float
    frac_strichartz_l4: float
    local_energy: Dict[float, float]
    long_time_S: float
    bilinear: Dict[str, float] = field(default_factory=dict)
    terms: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.terms:
            total = sum(self.terms.values())
            if abs(total - self.long_time_S) > 1e-12 * max(1.0, abs(total)):
                raise ValueError("long_time_S must equal the sum of its terms")


def energy(state: State) -> float:
    """E(u) = 1/2 ||grad u||^2 + 1/2 ||u_t||^2 + 1/4 ||u||_{L^4}^4.

    The quadratic terms are computed spectrally (exact on the grid), the
    quartic term by physical quadrature.  Nonnegative by construction.
    """
    grid = state.grid
    gc = to_spectral(state.u).coeffs
    hc = to_spectral(state.ut).coeffs
    w = FOUR_PI * (grid.r_max / 2.0)
    grad2 = w * float(np.sum((grid.rho * gc) ** 2))
    kin2 = w * float(np.sum(hc**2))
    return 0.5 * grad2 + 0.5 * kin2 + 0.25 * quartic_integral(state.u)


def _smoothed_pair(state: State, N: float, s: float):
    spec = MultiplierSpec.i_op(N, s)
    return apply_multiplier(state.u, spec), apply_multiplier(state.ut, spec)


def modified_energy(state: State, N: float, s: float) -> float:
    """E(Iu): the energy of the smoothed pair (Iu, Iu_t).

    Equals energy(state) exactly whenever the state is band-limited to
    [0, N], where the smoothing symbol is 1.
    """
    iu, iut = _smoothed_pair(state, N, s)
    return energy(State(iu, iut, state.t))


def modified_energy_derivative(state: State, N: float, s: float) -> float:
    """d/dt E(Iu) along the flow: the pairing of Iu_t with the cubic commutator.

    I(u^3) is formed by cubing pointwise then smoothing spectrally; (Iu)^3 by
    smoothing then cubing.  Vanishes identically (to rounding) when both
    state components are band-limited below N.
    """
    iu, iut = _smoothed_pair(state, N, s)
    cube_then_smooth = apply_multiplier(
        RadialField(state.grid, state.u.values**3), MultiplierSpec.i_op(N, s)
    )
    commutator = RadialField(state.grid, iu.values**3 - cube_then_smooth.values)
    return l2_pairing(iut, commutator)


def modified_energy_label(N: float, s: float) -> str:
    return f"E_Iu@N={N:g},s={s:g}"


def sobolev_label(s: float) -> str:
    return f"H@s={s:g}"


def energy_observer():
    return ("energy", energy)


def modified_energy_observer(N: float, s: float):
    return (modified_energy_label(N, s), lambda st: modified_energy(st, N, s))


def sobolev_observer(s: float, component: str = "u"):
    if component == "u":
        return (sobolev_label(s), lambda st: sobolev_norm(st.u, s))
    if component == "ut":
        return (f"Ht@s={s:g}", lambda st: sobolev_norm(st.ut, s))
    raise ValueError(f"unknown component {component!r}")


def _component_field(state: State, component: str) -> RadialField:
    if component == "u":
        return state.u
    if component in ("ut", "u_t"):
        return state.ut
    raise ValueError(f"unknown component {component!r}; expected 'u' or 'ut'")


def _filtered_values(
    traj: Trajectory,
    operator: Optional[MultiplierSpec],
    component: str,
    gradient: bool = False,
):
    """Per-snapshot sample arrays of (optional multiplier, optional d/dr) applied."""
    out = []
    for snap in traj.snapshots:
        f = _component_field(snap, component)
        if operator is not None:
            f = apply_multiplier(f, operator)
        if gradient:
            f = radial_derivative(f)
        out.append(f)
    return out


def _require_snapshots(traj: Trajectory, n: int = 2):
    if len(traj.snapshots) < n:
        raise ValueError(f"need at least {n} snapshots, trajectory has {len(traj.snapshots)}")


def strichartz_l4(
    traj: Trajectory,
    operator: Optional[MultiplierSpec] = None,
    component: str = "u",
) -> float:
    """Space-time L^4 norm (int dt 4 pi int (Op f)^4 r^2 dr)^(1/4)."""
    _require_snapshots(traj)
    fields = _filtered_values(traj, operator, component)
    vals = np.array([quartic_integral(f) for f in fields])
    return float(np.trapezoid(vals, traj.times) ** 0.25)


def local_energy(
    traj: Trajectory,
    R: float,
    component: str = "grad_u",
    operator: Optional[MultiplierSpec] = None,
) -> float:
    """R^(-1/2) weighted L^2 norm over the space-time cylinder |x| <= R."""
    grid = traj.grid
    if not 0 < R <= grid.r_max:
        raise ValueError(f"R must lie in (0, r_max={grid.r_max}], got {R}")
    _require_snapshots(traj)
    gradient = component == "grad_u"
    base = "u" if gradient else component
    fields = _filtered_values(traj, operator, base, gradient=gradient)
    vals = np.array([ball_mass(f, R) for f in fields])
    return float(R ** (-0.5) * np.sqrt(np.trapezoid(vals, traj.times)))


def dyadic_radii(traj: Trajectory, N: float, T0: float) -> np.ndarray:
    """Dyadic radii 1/N, 2/N, ... capped by min(4 T0, r_max)."""
    top = min(4.0 * T0, traj.grid.r_max)
    radii = []
    R = 1.0 / N
    while R <= top:
        radii.append(R)
        R *= 2.0
    if not radii:
        radii = [top]
    return np.array(radii)


def _sup_local(traj, radii, component, operator, gradient):
    fields = _filtered_values(traj, operator, component, gradient=gradient)
    best = 0.0
    for R in radii:
        vals = np.array([ball_mass(f, R) for f in fields])
        best = max(best, float(R ** (-0.5) * np.sqrt(np.trapezoid(vals, traj.times))))
    return best


def long_time_S_breakdown(
    traj: Trajectory, M: float, N: float, s: float, T0: float
) -> Dict[str, float]:
    """The five constituents of S(M) for the smoothing level (N, s).

    Terms: the two high-pass fractional Strichartz norms and three dyadic
    local-energy suprema (the last carrying the factor M).
    """
    if M > N:
        raise ValueError(f"need M <= N, got M={M}, N={N}")
    if T0 < traj.duration - 1e-12:
        raise ValueError(f"T0={T0} must cover the trajectory duration {traj.duration}")
    _require_snapshots(traj)
    i_spec = MultiplierSpec.i_op(N, s)
    hi = MultiplierSpec.lp_gt(M)
    hi_i = MultiplierSpec.product([hi, i_spec])
    radii = dyadic_radii(traj, N, T0)
    return {
        "strichartz_half_deriv": strichartz_l4(
            traj, MultiplierSpec.product([hi, MultiplierSpec.frac_deriv(0.5), i_spec]), "u"
        ),
        "strichartz_half_antideriv_ut": strichartz_l4(
            traj, MultiplierSpec.product([hi, MultiplierSpec.frac_deriv(-0.5), i_spec]), "ut"
        ),
        "local_grad": _sup_local(traj, radii, "u", hi_i, gradient=True),
        "local_ut": _sup_local(traj, radii, "ut", hi_i, gradient=False),
        "local_u_scaled": M * _sup_local(traj, radii, "u", hi_i, gradient=False),
    }


def long_time_S(traj: Trajectory, M: float, N: float, s: float, T0: float) -> float:
    """Sum of the five terms of the long-time high-frequency bundle S(M)."""
    return float(sum(long_time_S_breakdown(traj, M, N, s, T0).values()))


def bilinear_quantities(
    traj: Trajectory, M: float, N: float, s: float, T0: float
) -> Dict[str, float]:
    """L^2 space-time norms of the three bilinear products over |x| <= 4 T0.

    blspace: (P_{>M/8} grad Iu)(P_{<N} u)
    blfreq:  (P_{>M/8} u)(P_{<N} u)
    biltime: (P_{>M/8} Iu_t)(P_{<N} u)

    Spatial restriction caps at the grid radius.
    """
    if M > N:
        raise ValueError(f"need M <= N, got M={M}, N={N}")
    _require_snapshots(traj)
    grid = traj.grid
    R = min(4.0 * T0, grid.r_max)
    i_spec = MultiplierSpec.i_op(N, s)
    hi = MultiplierSpec.lp_gt(M / 8.0)
    hi_i = MultiplierSpec.product([hi, i_spec])
    low = MultiplierSpec.lp_leq(N)

    factors = {
        "blspace": _filtered_values(traj, hi_i, "u", gradient=True),
        "blfreq": _filtered_values(traj, hi, "u"),
        "biltime": _filtered_values(traj, hi_i, "ut"),
    }
    lows = _filtered_values(traj, low, "u")
    out = {}
    for name, highs in factors.items():
        vals = np.array(
            [
                ball_mass(RadialField(grid, h.values * l.values), R)
                for h, l in zip(highs, lows)
            ]
        )
        out[name] = float(np.sqrt(np.trapezoid(vals, traj.times)))
    return out


def sup_grad_smoothed(traj: Trajectory, N: float, s: float) -> float:
    """sup over snapshots of ||Iu||_{H^1}, the energy-size factor in ratio checks."""
    spec = MultiplierSpec.i_op(N, s)
    return max(sobolev_norm(apply_multiplier(snap.u, spec), 1.0) for snap in traj.snapshots)


def _column_order(keys) -> list:
    keys = set(keys)
    keys.discard("t")
    ordered = ["t"]
    if "energy" in keys:
        ordered.append("energy")
        keys.discard("energy")
    ordered += sorted(k for k in keys if k.startswith("E_Iu@"))
    ordered += sorted(k for k in keys if k.startswith("H@") or k.startswith("Ht@"))
    ordered += sorted(
        k for k in keys if not (k.startswith("E_Iu@") or k.startswith("H@") or k.startswith("Ht@"))
    )
    return ordered


def format_float(x: float) -> str:
    return f"{x:.17g}"


def write_timeseries(path, rows: Sequence[dict]) -> None:
    """Tab-delimited time series, one row per snapshot, schema header row.

    Column order is fixed: t, energy, smoothed energies, norms, extras; all
    reals carry 17 significant digits.  Written atomically.
    """
    if not rows:
        raise ValueError("refusing to write an empty time series")
    cols = _column_order(set().union(*(r.keys() for r in rows)))
    lines = [f"# radialwave timeseries v{TIMESERIES_FORMAT_VERSION}", "\t".join(cols)]
    for r in rows:
        lines.append("\t".join(format_float(float(r.get(c, np.nan))) for c in cols))
    text = "\n".join(lines) + "\n"
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", prefix=".ts-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
