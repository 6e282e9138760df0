"""Catalog of two-level Hamiltonians, jump operators and Liouvillians.

All generators used by the scanners and integrators live here:

* ``pt``: the parity-time symmetric two-level Hamiltonian
  J*sx - i(Gamma/2)*sz, with its exceptional point at J = Gamma/2.
* ``encircle``: the same model with an extra real sz coefficient, so a
  circle in the (J, Omega) plane can wind around the exceptional point.
* ``coldatom_heff``: effective non-Hermitian Hamiltonian of a laser-lossy
  Raman-coupled pair of levels (no-jump reduction).
* ``basic_liouvillian`` / ``detuned_liouvillian``: full Lindblad generator
  of the decaying two-level system, vectorized row-major.
* ``coldatom_liouvillian``: post-selected generator with loss (recycling
  term dropped) plus dephasing (recycling term kept).

Vectorization is row-major throughout: rho -> (r11, r12, r21, r22).  The
column-stacking alternative would transpose the coherence blocks of every
superoperator; the row-major choice is normative for all serialized output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, UnknownModel
from .linalg import as_matrix, eig, kron

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

# Lowering operator |1><2|: decay lands in state 1.  This placement fixes
# the sign/row layout of every Liouvillian below.
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
PROJ_2 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)


@dataclass(frozen=True)
class PTParams:
    """Coupling J and loss rate Gamma of the PT-symmetric two-level model."""

    J: float
    Gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.J) and math.isfinite(self.Gamma)):
            raise ValueError("PTParams requires finite J and Gamma")
        if self.J < 0 or self.Gamma < 0:
            raise ValueError("PTParams requires J >= 0 and Gamma >= 0")


@dataclass(frozen=True)
class PerturbParams:
    """Strength of the sx perturbation applied at the exceptional point."""

    epsilon: float

    def __post_init__(self):
        if not math.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")


@dataclass(frozen=True)
class ColdAtomParams:
    """Raman detuning, coupling, loss rate and dephasing rate.

    ``coupling`` is the Rabi term; the effective-Hamiltonian form and the
    post-selected Liouvillian name it differently (Omega vs J), the catalog
    exposes the single name with aliases in MODEL parameter tables.
    """

    delta: float
    coupling: float
    Gamma: float
    gamma: float = 0.0

    def __post_init__(self):
        for v in (self.delta, self.coupling, self.Gamma, self.gamma):
            if not math.isfinite(v):
                raise ValueError("ColdAtomParams requires finite values")
        if self.coupling < 0 or self.Gamma < 0 or self.gamma < 0:
            raise ValueError("rates must be non-negative")


@dataclass(frozen=True)
class JumpTerm:
    """A Lindblad jump operator; drop_recycling drops the L rho L^dag term.

    Dropping the recycling term post-selects the no-jump evolution; only the
    anticommutator (damping) part of the dissipator remains.
    """

    operator: np.ndarray
    drop_recycling: bool = False


@dataclass(frozen=True)
class EncirclePath:
    """A circle traversed in a 2-D parameter plane.

    With the default "cos-sin" convention the point at time t is
        x(t) = center[0] + radius * cos(theta),
        y(t) = center[1] + radius * sin(theta);
    the "sin-cos" convention swaps cos and sin, which lets paths published
    as (x, y) = (sin, cos) pairs keep their printed phase offset verbatim.
    ``direction`` is geometric: "ccw"/"cw" in the standard orientation of
    the plane, independent of the convention (the angle runs backwards in
    time for sin-cos ccw).
    """

    center: tuple[float, float]
    radius: float
    period: float
    direction: str = "ccw"
    phase0: float = 0.0
    plane: str = "J-Omega"
    convention: str = "cos-sin"

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.center):
            raise ValueError("path center must be finite")
        if not (math.isfinite(self.radius) and self.radius >= 0):
            raise ValueError("radius must be finite and non-negative")
        if not (math.isfinite(self.period) and self.period > 0):
            raise ValueError("period must be positive")
        if self.direction not in ("ccw", "cw"):
            raise ValueError("direction must be 'ccw' or 'cw'")
        if self.convention not in ("cos-sin", "sin-cos"):
            raise ValueError("convention must be 'cos-sin' or 'sin-cos'")

    @property
    def sign(self) -> float:
        """Sign of d(theta)/dt realizing the requested orientation."""
        ccw = self.direction == "ccw"
        if self.convention == "cos-sin":
            return 1.0 if ccw else -1.0
        return -1.0 if ccw else 1.0

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.period

    def reversed(self) -> "EncirclePath":
        return replace(self, direction="cw" if self.direction == "ccw" else "ccw")

    def point(self, t):
        """Plane coordinates (x, y) at time t; t may be an array."""
        theta = self.phase0 + self.sign * self.omega * np.asarray(t, dtype=float)
        if self.convention == "cos-sin":
            return (
                self.center[0] + self.radius * np.cos(theta),
                self.center[1] + self.radius * np.sin(theta),
            )
        return (
            self.center[0] + self.radius * np.sin(theta),
            self.center[1] + self.radius * np.cos(theta),
        )


def pt_hamiltonian(p: PTParams) -> np.ndarray:
    """J*sx - i(Gamma/2)*sz."""
    return p.J * SIGMA_X - 0.5j * p.Gamma * SIGMA_Z


def encircle_model(J, Omega, Gamma) -> np.ndarray:
    """J*sx - (Omega + i Gamma/2)*sz, the plane model hosting the EP ring.

    Accepts scalars or broadcastable arrays and returns a stacked (... ,2,2)
    array in the latter case.
    """
    J, Omega, Gamma = np.broadcast_arrays(
        np.asarray(J, dtype=float),
        np.asarray(Omega, dtype=float),
        np.asarray(Gamma, dtype=float),
    )
    out = np.zeros(J.shape + (2, 2), dtype=complex)
    out[..., 0, 1] = J
    out[..., 1, 0] = J
    out[..., 0, 0] = -(Omega + 0.5j * Gamma)
    out[..., 1, 1] = Omega + 0.5j * Gamma
    return out


def encircle_hamiltonian(path: EncirclePath, Gamma: float, t) -> np.ndarray:
    """Instantaneous Hamiltonian J(t)*sx - (Omega(t) + i Gamma/2)*sz."""
    J, Omega = path.point(t)
    return encircle_model(J, Omega, Gamma)


def coldatom_heff(p: ColdAtomParams) -> np.ndarray:
    """(delta/2)*sz - coupling*sx - i(Gamma/4)(1 - sz)."""
    return (
        0.5 * p.delta * SIGMA_Z
        - p.coupling * SIGMA_X
        - 0.25j * p.Gamma * (IDENTITY_2 - SIGMA_Z)
    )


def build_liouvillian(h, jumps: list[JumpTerm]) -> np.ndarray:
    """Lindblad generator acting on the row-major vectorized density matrix.

    Returns
        -i (h kron I - I kron h^T)
        + sum over jumps of
            (L kron L*) * (recycling kept)
            - 1/2 (L^dag L kron I) - 1/2 (I kron (L^dag L)^T).
    """
    hm = as_matrix(h)
    d = hm.shape[0]
    eye = np.eye(d, dtype=complex)
    out = -1j * (kron(hm, eye) - kron(eye, hm.T))
    for term in jumps:
        op = as_matrix(term.operator)
        if op.shape[0] != d:
            raise DimensionMismatch(
                f"jump operator dim {op.shape[0]} != system dim {d}"
            )
        ldl = op.conj().T @ op
        if not term.drop_recycling:
            out = out + kron(op, op.conj())
        out = out - 0.5 * kron(ldl, eye) - 0.5 * kron(eye, ldl.T)
    return out


def basic_liouvillian(J: float, Gamma: float) -> np.ndarray:
    """Full Lindblad generator of H = J*sx with decay sqrt(Gamma)|1><2|."""
    return build_liouvillian(
        J * SIGMA_X, [JumpTerm(np.sqrt(Gamma) * SIGMA_MINUS)]
    )


def detuned_liouvillian(J: float, Gamma: float, delta: float) -> np.ndarray:
    """Same as basic_liouvillian with a (delta/2)*sz term in the Hamiltonian."""
    return build_liouvillian(
        J * SIGMA_X + 0.5 * delta * SIGMA_Z,
        [JumpTerm(np.sqrt(Gamma) * SIGMA_MINUS)],
    )


def coldatom_liouvillian(p: ColdAtomParams) -> np.ndarray:
    """Post-selected generator: loss without recycling, dephasing with it.

    The loss jump empties state 2 into an unobserved bystander level, so only
    its damping part acts on the retained two-level block (drop_recycling);
    the dephasing jump sqrt(gamma)|2><2| keeps its recycling term, which
    cancels on the population diagonal and leaves the printed -Gamma there.
    """
    return build_liouvillian(
        p.coupling * SIGMA_X + 0.5 * p.delta * SIGMA_Z,
        [
            JumpTerm(np.sqrt(p.Gamma) * SIGMA_MINUS, drop_recycling=True),
            JumpTerm(np.sqrt(p.gamma) * PROJ_2, drop_recycling=False),
        ],
    )


def perturbed_ep_splitting(p: PTParams, q: PerturbParams):
    """Eigenvalue pair of the EP Hamiltonian perturbed by epsilon*sx.

    Requires J = Gamma/2 (the exceptional point).  The splitting follows
    +-sqrt(eps (2J + eps)), i.e. a square-root lift of the degeneracy.
    """
    if abs(p.J - 0.5 * p.Gamma) > 1e-12 * (1.0 + abs(p.J)):
        raise ValueError("perturbed_ep_splitting requires J = Gamma/2")
    d = eig(pt_hamiltonian(p) + q.epsilon * SIGMA_X)
    return d.eigenvalues[0], d.eigenvalues[1]


# --------------------------------------------------------------------------
# Model catalog: named builders for the scanners and the CLI.


@dataclass(frozen=True)
class ModelSpec:
    """A named generator family with a declared parameter list.

    ``build`` takes scalar or broadcastable array values for every parameter
    in ``params`` and returns a (..., dim, dim) array.  ``kind`` is
    "hamiltonian" or "liouvillian"; it decides which equation of motion the
    integrators apply and how trajectories are read out.
    """

    name: str
    dim: int
    kind: str
    params: tuple[str, ...]
    defaults: dict = field(default_factory=dict)
    build: Callable = None

    def matrix(self, **values) -> np.ndarray:
        unknown = set(values) - set(self.params)
        if unknown:
            raise ValueError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        merged = dict(self.defaults)
        merged.update(values)
        missing = [p for p in self.params if p not in merged]
        if missing:
            raise ValueError(f"missing parameters for {self.name}: {missing}")
        return self.build(**merged)


def _linear_batch(scalar_build: Callable, params: tuple[str, ...], dim: int):
    """Lift a scalar builder that is linear in every parameter to arrays.

    All catalog generators are linear in their parameters, so the stacked
    matrix is  base + sum_p p * basis_p  with basis matrices extracted from
    the scalar builder once.
    """
    zeros = {p: 0.0 for p in params}
    base = scalar_build(**zeros)
    basis = {}
    for p in params:
        probe = dict(zeros)
        probe[p] = 1.0
        basis[p] = scalar_build(**probe) - base

    def build(**values):
        arrays = {p: np.asarray(values[p], dtype=float) for p in params}
        shape = np.broadcast_shapes(*(a.shape for a in arrays.values()))
        if shape == ():
            return scalar_build(**{p: float(arrays[p]) for p in params})
        out = np.zeros(shape + (dim, dim), dtype=complex)
        out += base
        for p in params:
            out += arrays[p][..., None, None] * basis[p]
        return out

    return build


def _pt_scalar(J, Gamma):
    return J * SIGMA_X - 0.5j * Gamma * SIGMA_Z


def _coldatom_heff_scalar(delta, coupling, Gamma):
    return (
        0.5 * delta * SIGMA_Z
        - coupling * SIGMA_X
        - 0.25j * Gamma * (IDENTITY_2 - SIGMA_Z)
    )


def _encircle_scalar(J, Omega, Gamma):
    return encircle_model(J, Omega, Gamma)


def _basic_liouv_scalar(J, Gamma):
    return basic_liouvillian(J, Gamma)


def _detuned_liouv_scalar(J, Gamma, delta):
    return detuned_liouvillian(J, Gamma, delta)


def _coldatom_liouv_scalar(delta, coupling, Gamma, gamma):
    return coldatom_liouvillian(
        ColdAtomParams(delta=delta, coupling=coupling, Gamma=Gamma, gamma=gamma)
    )


MODELS: dict[str, ModelSpec] = {}


def _register(name, dim, kind, params, scalar, defaults=None):
    MODELS[name] = ModelSpec(
        name=name,
        dim=dim,
        kind=kind,
        params=params,
        defaults=defaults or {},
        build=_linear_batch(scalar, params, dim),
    )


_register("pt", 2, "hamiltonian", ("J", "Gamma"), _pt_scalar)
_register(
    "encircle", 2, "hamiltonian", ("J", "Omega", "Gamma"), _encircle_scalar,
    defaults={"Omega": 0.0},
)
_register(
    "coldatom_heff", 2, "hamiltonian", ("delta", "coupling", "Gamma"),
    _coldatom_heff_scalar,
)
_register("basic_liouvillian", 4, "liouvillian", ("J", "Gamma"), _basic_liouv_scalar)
_register(
    "detuned_liouvillian", 4, "liouvillian", ("J", "Gamma", "delta"),
    _detuned_liouv_scalar,
)
_register(
    "coldatom_liouvillian", 4, "liouvillian", ("delta", "coupling", "Gamma", "gamma"),
    _coldatom_liouv_scalar,
)

# Parameter aliases accepted in configs; the printed post-selected generator
# calls the Rabi term J while the effective Hamiltonian calls it Omega.
PARAM_ALIASES = {
    "coldatom_liouvillian": {"J": "coupling", "Omega": "coupling"},
    "coldatom_heff": {"J": "coupling", "Omega": "coupling"},
}


def get_model(name: str) -> ModelSpec:
    try:
        return MODELS[name]
    except KeyError:
        raise UnknownModel(f"unknown model '{name}'; known: {sorted(MODELS)}") from None


def resolve_params(model: ModelSpec, values: dict) -> dict:
    """Apply per-model aliases and reject unknown parameter names."""
    aliases = PARAM_ALIASES.get(model.name, {})
    out = {}
    for key, val in values.items():
        canon = aliases.get(key, key)
        if canon not in model.params:
            raise ValueError(
                f"model '{model.name}' has no parameter '{key}'"
                f" (expected {list(model.params)})"
            )
        out[canon] = val
    return out


@dataclass(frozen=True)
class PathDrive:
    """A catalog model driven along an EncirclePath in two of its parameters.

    The path's plane string "x-y" names which parameters the path
    coordinates feed; the rest stay fixed.  Calling ``matrices(times)``
    evaluates the stacked generators for a whole time grid at once.
    """

    model: ModelSpec
    path: EncirclePath
    fixed: dict

    def __post_init__(self):
        object.__setattr__(self, "fixed", resolve_params(self.model, self.fixed))
        x_name, y_name = self.axis_names
        for nm in (x_name, y_name):
            if nm not in self.model.params:
                raise ValueError(
                    f"plane axis '{nm}' is not a parameter of model "
                    f"'{self.model.name}'"
                )

    @property
    def axis_names(self) -> tuple[str, str]:
        parts = self.path.plane.split("-")
        if len(parts) != 2:
            raise ValueError(f"plane '{self.path.plane}' is not of the form 'x-y'")
        aliases = PARAM_ALIASES.get(self.model.name, {})
        return aliases.get(parts[0], parts[0]), aliases.get(parts[1], parts[1])

    @property
    def direction(self) -> str:
        return self.path.direction

    def with_direction(self, direction: str) -> "PathDrive":
        return replace(self, path=replace(self.path, direction=direction))

    def matrices(self, times) -> np.ndarray:
        x, y = self.path.point(times)
        x_name, y_name = self.axis_names
        values = dict(self.fixed)
        values[x_name] = x
        values[y_name] = y
        return self.model.matrix(**values)

    def matrix(self, t: float) -> np.ndarray:
        return self.matrices(float(t))
