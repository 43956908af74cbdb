"""Fixed-length genome encoding of a heralded experiment.

A genome is 12 continuous genes in ``[0, 1]`` plus 12 categorical genes.
Decoding scales the continuous genes onto physical ranges; genes that
the categorical choices leave unused are ignored, and
:func:`canonical` zeroes them so equivalent genomes compare equal.
"""

from dataclasses import dataclass

import numpy as np

from .fock import Experiment

OP_SLOTS = 3
N_CONT = 6 + 2 * OP_SLOTS
N_CAT = 5 + 2 * OP_SLOTS + 1

# categorical gene cardinalities, in order:
# source, in0_kind, in0_fock, in1_kind, in1_fock,
# (op_kind, op_mode) per slot, herald_n
CARDINALITIES = (2, 3, 3, 3, 3) + (4, 2) * OP_SLOTS + (9,)

TMSV_MAG_MAX = 1.3
SQUEEZE_MAG_MAX = 1.3
COHERENT_MAG_MAX = 4.0
DISPLACEMENT_MAG_MAX = 4.0

_INPUT_KINDS = ("fock", "coherent", "squeezed")
_OP_KINDS = ("none", "beamsplitter", "phase", "displacement")
_TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class Genome:
    cont: np.ndarray
    cats: np.ndarray

    def __post_init__(self):
        if self.cont.shape != (N_CONT,) or self.cats.shape != (N_CAT,):
            raise ValueError("genome has wrong shape")
        self.cont.setflags(write=False)
        self.cats.setflags(write=False)

    def to_dict(self) -> dict:
        return {"cont": [float(x) for x in self.cont], "cats": [int(x) for x in self.cats]}

    @staticmethod
    def from_dict(d: dict) -> "Genome":
        return Genome(
            cont=np.asarray(d["cont"], dtype=float),
            cats=np.asarray(d["cats"], dtype=np.int64),
        )


def random_genome(rng: np.random.Generator) -> Genome:
    cont = rng.random(N_CONT)
    cats = rng.integers(0, np.asarray(CARDINALITIES))
    return Genome(cont=cont, cats=cats.astype(np.int64))


def _phase(x: float) -> float:
    return float((x * _TWO_PI) % _TWO_PI)


def _input_spec(kind_gene: int, fock_gene: int, mag_gene: float, phase_gene: float):
    kind = _INPUT_KINDS[kind_gene]
    if kind == "fock":
        return ("fock", int(fock_gene))
    scale = COHERENT_MAG_MAX if kind == "coherent" else SQUEEZE_MAG_MAX
    return (kind, scale * mag_gene * np.exp(1j * _phase(phase_gene)))


def decode(g: Genome) -> Experiment:
    """Map a genome onto a concrete experiment."""
    cont, cats = g.cont, g.cats
    operations = []
    for slot in range(OP_SLOTS):
        kind = _OP_KINDS[cats[5 + 2 * slot]]
        mode = int(cats[6 + 2 * slot])
        p1 = float(cont[6 + 2 * slot])
        p2 = float(cont[7 + 2 * slot])
        if kind == "none":
            continue
        if kind == "beamsplitter":
            operations.append(("beamsplitter", p1))
        elif kind == "phase":
            operations.append(("phase", mode, _phase(p1)))
        else:
            beta = DISPLACEMENT_MAG_MAX * p1 * np.exp(1j * _phase(p2))
            operations.append(("displacement", mode, beta))

    if cats[0] == 0:
        z = TMSV_MAG_MAX * cont[0] * np.exp(1j * _phase(cont[1]))
        return Experiment(
            source="tmsv",
            source_param=z,
            operations=tuple(operations),
            herald_n=int(cats[11]),
        )
    return Experiment(
        source="independent",
        inputs=(
            _input_spec(cats[1], cats[2], cont[2], cont[3]),
            _input_spec(cats[3], cats[4], cont[4], cont[5]),
        ),
        operations=tuple(operations),
        herald_n=int(cats[11]),
    )


def canonical(g: Genome) -> Genome:
    """Zero every gene the decoding ignores.

    Decoding a genome and its canonical form gives the same experiment,
    so canonical genomes are a unique representative per behaviour.
    """
    cont = g.cont.copy()
    cats = g.cats.copy()
    if cats[0] == 0:
        cats[1:5] = 0
        cont[2:6] = 0.0
    else:
        cont[0:2] = 0.0
        for j in (0, 1):
            kind = _INPUT_KINDS[cats[1 + 2 * j]]
            if kind == "fock":
                cont[2 + 2 * j : 4 + 2 * j] = 0.0
            else:
                cats[2 + 2 * j] = 0
    for slot in range(OP_SLOTS):
        kind = _OP_KINDS[cats[5 + 2 * slot]]
        if kind == "none":
            cats[6 + 2 * slot] = 0
            cont[6 + 2 * slot : 8 + 2 * slot] = 0.0
        elif kind == "beamsplitter":
            cats[6 + 2 * slot] = 0
            cont[7 + 2 * slot] = 0.0
        elif kind == "phase":
            cont[7 + 2 * slot] = 0.0
    return Genome(cont=cont, cats=cats)
