"""Two-mode heralded experiments on a truncated Fock space.

An :class:`Experiment` prepares two input modes, applies a sequence of
passive and active operations, and projects mode 0 onto a photon number.
The surviving mode 1 amplitudes, renormalised, are the output state.

Joint amplitudes are stored as ``amps[n0, n1]`` with mode 0 on axis 0.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .errors import DomainError, HeraldImprobableError, TruncationInsufficientError

log = logging.getLogger(__name__)

CAPTURE_MIN = 1 - 1e-6
LEAK_MAX = 1e-6
HERALD_FLOOR = 1e-8

INPUT_KINDS = ("fock", "coherent", "squeezed")
OPERATION_KINDS = ("beamsplitter", "phase", "displacement")


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Squared overlap of two pure-state amplitude vectors.

    Shorter vectors are zero padded, so states truncated at different
    cutoffs compare as embeddings of the same space. Unit inputs can
    overshoot 1 by rounding, so the result is capped there.
    """
    n = min(a.size, b.size)
    return float(min(abs(np.vdot(a[:n], b[:n])) ** 2, 1.0))


def normalized(a: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(a)
    if nrm < 1e-154:
        raise DomainError("cannot normalise a zero vector")
    return a / nrm


def number_distribution(amps: np.ndarray) -> np.ndarray:
    """Element-wise modulus ``|amps[n]|`` of an amplitude vector.

    This is the phase-blind representation the classifier consumes.
    """
    return np.abs(np.asarray(amps))


@dataclass(frozen=True)
class Experiment:
    """Description of one heralded preparation.

    source
        ``"tmsv"`` for a two-mode squeezed vacuum with parameter
        ``source_param``, or ``"independent"`` for a product of the two
        ``inputs``, each ``("fock", n)``, ``("coherent", alpha)`` or
        ``("squeezed", z)``.
    operations
        Tuple applied in order; entries are ``("beamsplitter", T)``,
        ``("phase", mode, theta)`` or ``("displacement", mode, beta)``.
    herald_n
        Photon count measured on mode 0.
    """

    source: str
    source_param: complex = 0j
    inputs: tuple = ()
    operations: tuple = ()
    herald_n: int = 0

    def __post_init__(self):
        if self.source not in ("tmsv", "independent"):
            raise DomainError(f"unknown source {self.source!r}")
        if self.source == "independent" and len(self.inputs) != 2:
            raise DomainError("independent source requires exactly two inputs")
        for spec in self.inputs:
            if spec[0] not in INPUT_KINDS:
                raise DomainError(f"unknown input kind {spec[0]!r}")
        for op in self.operations:
            if op[0] not in OPERATION_KINDS:
                raise DomainError(f"unknown operation kind {op[0]!r}")
        if self.herald_n < 0:
            raise DomainError("herald photon number must be non-negative")

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "source_param": [self.source_param.real, self.source_param.imag],
            "inputs": [_input_to_json(s) for s in self.inputs],
            "operations": [_op_to_json(o) for o in self.operations],
            "herald_n": self.herald_n,
        }

    @staticmethod
    def from_dict(d: dict) -> "Experiment":
        return Experiment(
            source=d["source"],
            source_param=complex(*d["source_param"]),
            inputs=tuple(_input_from_json(s) for s in d["inputs"]),
            operations=tuple(_op_from_json(o) for o in d["operations"]),
            herald_n=int(d["herald_n"]),
        )


def _input_to_json(spec):
    kind, p = spec
    if kind == "fock":
        return [kind, int(p)]
    return [kind, [p.real, p.imag]]


def _input_from_json(j):
    kind, p = j
    if kind == "fock":
        return (kind, int(p))
    return (kind, complex(*p))


def _op_to_json(op):
    if op[0] == "beamsplitter":
        return ["beamsplitter", op[1]]
    if op[0] == "phase":
        return ["phase", op[1], op[2]]
    return ["displacement", op[1], [op[2].real, op[2].imag]]


def _op_from_json(j):
    if j[0] == "beamsplitter":
        return ("beamsplitter", float(j[1]))
    if j[0] == "phase":
        return ("phase", int(j[1]), float(j[2]))
    return ("displacement", int(j[1]), complex(*j[2]))


@dataclass(frozen=True)
class HeraldResult:
    """Output of a heralded run: mode 1 amplitudes and bookkeeping."""

    amplitudes: np.ndarray
    herald_probability: float
    truncation: int
    losses: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.amplitudes.setflags(write=False)


def _mode_amplitudes(spec, truncation: int):
    """Build one input mode; returns normalised amplitudes and the capture."""
    kind, p = spec
    if kind == "fock":
        if p > truncation:
            raise TruncationInsufficientError(
                f"fock input |{p}> exceeds truncation {truncation}"
            )
        return ops.fock_amplitudes(int(p), truncation), 1.0
    if kind == "coherent":
        c = ops.coherent_amplitudes(p, truncation)
    else:
        c = ops.squeezed_vacuum_amplitudes(p, truncation)
    capture = float(np.sum(np.abs(c) ** 2))
    if capture < CAPTURE_MIN:
        raise TruncationInsufficientError(
            f"{kind} input captures {capture:.8f} < {CAPTURE_MIN} at truncation {truncation}"
        )
    return c / np.sqrt(capture), capture


def _pre_measurement(exp: Experiment, truncation: int):
    """Joint amplitudes just before heralding, with per-step losses."""
    if exp.source == "tmsv":
        amps = ops.two_mode_squeezed_amplitudes(exp.source_param, truncation)
        capture = float(np.sum(np.abs(amps) ** 2))
        if capture < CAPTURE_MIN:
            raise TruncationInsufficientError(
                f"tmsv source captures {capture:.8f} < {CAPTURE_MIN} at truncation {truncation}"
            )
        amps = amps / np.sqrt(capture)
    else:
        a, cap_a = _mode_amplitudes(exp.inputs[0], truncation)
        b, cap_b = _mode_amplitudes(exp.inputs[1], truncation)
        amps = np.outer(a, b)
        capture = cap_a * cap_b
    losses = [max(1.0 - capture, 0.0)]

    for op in exp.operations:
        if op[0] == "beamsplitter":
            amps = ops.beamsplitter_apply(amps, op[1])
        elif op[0] == "phase":
            _, mode, theta = op
            ph = ops.phase_factors(theta, truncation)
            amps = amps * (ph[:, None] if mode == 0 else ph[None, :])
        else:
            _, mode, beta = op
            D = ops.displacement_matrix(beta, truncation)
            amps = D @ amps if mode == 0 else amps @ D.T
        nrm2 = float(np.sum(np.abs(amps) ** 2))
        loss = 1.0 - nrm2
        if loss > LEAK_MAX:
            raise TruncationInsufficientError(
                f"{op[0]} lost {loss:.3e} of the state above truncation {truncation}"
            )
        if loss > 0:
            log.debug("%s leaked %.3e at truncation %d", op[0], loss, truncation)
            amps = amps / np.sqrt(nrm2)
        losses.append(max(loss, 0.0))
    return amps, tuple(losses)


def run_experiment(
    exp: Experiment,
    truncation: int,
    herald_floor: float = HERALD_FLOOR,
) -> HeraldResult:
    """Simulate one experiment at the given truncation.

    Raises :class:`TruncationInsufficientError` when an input or an
    operation loses more than ``LEAK_MAX`` of squared norm above the
    cutoff, and :class:`HeraldImprobableError` when the heralding
    outcome falls below ``herald_floor``. Sub-threshold leaks are
    renormalised away and reported in ``losses``.
    """
    if exp.herald_n > truncation:
        raise TruncationInsufficientError(
            f"herald photon number {exp.herald_n} exceeds truncation {truncation}"
        )
    amps, losses = _pre_measurement(exp, truncation)
    row = amps[exp.herald_n, :].copy()
    p = float(np.sum(np.abs(row) ** 2))
    if p < herald_floor:
        raise HeraldImprobableError(p, herald_floor)
    return HeraldResult(
        amplitudes=row / np.sqrt(p),
        herald_probability=p,
        truncation=truncation,
        losses=losses,
    )


def herald_distribution(exp: Experiment, truncation: int) -> np.ndarray:
    """Probabilities of every heralding outcome ``0..truncation``.

    The pre-measurement state is normalised, so the entries sum to one.
    """
    amps, _ = _pre_measurement(exp, truncation)
    return np.sum(np.abs(amps) ** 2, axis=1)
