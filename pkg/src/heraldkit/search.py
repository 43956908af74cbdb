"""Staged genetic search for heralded preparations.

Stage 1 scores one large random pool and keeps the most promising
genomes per target, stage 2 evolves them against the target family grid
at a working truncation, and stage 3 refines the survivors with an
adaptive truncation ladder. A final coordinate descent polishes the
target parameters.

Randomness is drawn from named streams keyed by (seed, stage, target,
generation, slot), so results do not depend on evaluation order or the
thread count.
"""

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import classifier as clf
from . import genome as gn
from . import targets
from .config import SEARCHABLE_TARGETS, SearchConfig
from .errors import ConfigError, HeraldkitError
from .fock import run_experiment

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# variation operators


def power_mutate(g: gn.Genome, rng: np.random.Generator, power: float) -> gn.Genome:
    """Mutate every gene with power-law distributed step sizes.

    Continuous genes move toward 0 or 1 by ``u**power`` of the remaining
    distance, with the direction chosen in proportion to the current
    position. Categorical genes are resampled uniformly with the matching
    small probability.
    """
    cont = g.cont.copy()
    for i in range(cont.size):
        u = rng.random()
        s = u ** power
        r = rng.random()
        x = cont[i]
        cont[i] = x - s * x if r < x else x + s * (1 - x)
    cats = g.cats.copy()
    for i in range(cats.size):
        u = rng.random()
        v = rng.random()
        if v < u ** power:
            cats[i] = rng.integers(0, gn.CARDINALITIES[i])
    return gn.Genome(cont=cont, cats=cats)


def scattered_crossover(a: gn.Genome, b: gn.Genome, rng: np.random.Generator) -> gn.Genome:
    """Per-gene uniform mix of two parents."""
    mask = rng.random(gn.N_CONT + gn.N_CAT) < 0.5
    cont = np.where(mask[: gn.N_CONT], a.cont, b.cont)
    cats = np.where(mask[gn.N_CONT :], a.cats, b.cats)
    return gn.Genome(cont=cont, cats=cats)


def tournament_pick(fitness: np.ndarray, rng: np.random.Generator, size: int) -> int:
    """Index of the fittest of ``size`` uniform draws; ties go to the lowest index."""
    idx = rng.integers(0, fitness.size, size)
    best = np.max(fitness[idx])
    return int(np.min(idx[fitness[idx] == best]))


# ---------------------------------------------------------------------------
# one GA stage


@dataclass
class GAStageReport:
    stage: int
    target: str
    truncation: str
    population: int
    generations: int
    evaluations: int
    best_fitness: float
    mean_fitness: float
    history: list
    final_population: list
    final_fitness: list
    wall_time_s: float

    def comparable(self) -> dict:
        d = self.to_dict()
        d.pop("wall_time_s")
        return d

    def to_dict(self) -> dict:
        return {
            "kind": "ga_stage",
            "stage": self.stage,
            "target": self.target,
            "truncation": self.truncation,
            "population": self.population,
            "generations": self.generations,
            "evaluations": self.evaluations,
            "best_fitness": self.best_fitness,
            "mean_fitness": self.mean_fitness,
            "history": self.history,
            "final_population": self.final_population,
            "final_fitness": self.final_fitness,
            "wall_time_s": self.wall_time_s,
        }

    @staticmethod
    def from_dict(d: dict) -> "GAStageReport":
        d = {k: v for k, v in d.items() if k != "kind"}
        return GAStageReport(**d)


def run_ga_stage(
    initial: list,
    fitness_fn,
    cfg: SearchConfig,
    stage: int,
    target_index: int,
    truncation_label: str,
) -> GAStageReport:
    """Evolve ``initial`` for ``cfg.generations`` generations.

    ``fitness_fn`` maps a list of genomes to an array of scores; every
    generation re-evaluates the full population, so the total budget is
    exactly ``len(initial) * (generations + 1)`` evaluations.
    """
    t0 = time.perf_counter()
    pop = list(initial)
    n = len(pop)
    fitness = np.asarray(fitness_fn(pop), dtype=float)
    evaluations = n
    history = [_gen_stats(0, fitness)]

    n_children = n - cfg.elite
    n_cross = int(round(cfg.crossover_fraction * n_children))
    for gen in range(1, cfg.generations + 1):
        order = np.argsort(-fitness, kind="stable")
        children = []
        for slot in range(n_children):
            rng = np.random.default_rng((cfg.seed, stage, target_index, gen, slot))
            if slot < n_cross:
                p1 = tournament_pick(fitness, rng, cfg.tournament_size)
                p2 = tournament_pick(fitness, rng, cfg.tournament_size)
                children.append(scattered_crossover(pop[p1], pop[p2], rng))
            else:
                p = tournament_pick(fitness, rng, cfg.tournament_size)
                children.append(power_mutate(pop[p], rng, cfg.mutation_power))
        pop = [pop[i] for i in order[: cfg.elite]] + children
        fitness = np.asarray(fitness_fn(pop), dtype=float)
        evaluations += n
        history.append(_gen_stats(gen, fitness))

    best = int(np.argmax(fitness))
    return GAStageReport(
        stage=stage,
        target=SEARCHABLE_TARGETS[target_index],
        truncation=truncation_label,
        population=n,
        generations=cfg.generations,
        evaluations=evaluations,
        best_fitness=float(fitness[best]),
        mean_fitness=float(np.mean(fitness)),
        history=history,
        final_population=[g.to_dict() for g in pop],
        final_fitness=[float(f) for f in fitness],
        wall_time_s=time.perf_counter() - t0,
    )


def _gen_stats(gen: int, fitness: np.ndarray) -> dict:
    return {
        "generation": gen,
        "best": float(np.max(fitness)),
        "mean": float(np.mean(fitness)),
    }


# ---------------------------------------------------------------------------
# fitness functions


def _map_batch(eval_one, batch, threads: int):
    if threads <= 1:
        return [eval_one(g) for g in batch]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(eval_one, batch))


def make_grid_fitness(bank: targets.TargetBank, truncation: int, cfg: SearchConfig):
    """Best target-family fidelity of the heralded state; failures score 0."""

    def eval_one(g):
        try:
            res = run_experiment(gn.decode(g), truncation, cfg.herald_floor)
        except HeraldkitError:
            return 0.0
        return targets.best_fidelity_over_grid(res.amplitudes, bank)[0]

    def fitness(batch):
        return np.asarray(_map_batch(eval_one, batch, cfg.threads), dtype=float)

    return fitness


def make_adaptive_fitness(bank: targets.TargetBank, cfg: SearchConfig):
    """Grid fidelity on an escalating truncation ladder.

    Each genome is re-simulated at the next truncation until two
    consecutive values agree to ``convergence_rtol``; truncations the
    experiment cannot support are skipped.
    """

    def eval_one(g):
        exp = gn.decode(g)
        prev = None
        last = 0.0
        for t in cfg.stage3_truncations:
            try:
                res = run_experiment(exp, t, cfg.herald_floor)
            except HeraldkitError:
                prev = None
                continue
            f = targets.best_fidelity_over_grid(res.amplitudes, bank)[0]
            if prev is not None and abs(f - prev) <= cfg.convergence_rtol * max(
                f, prev, 1e-9
            ):
                return f
            prev = last = f
        return last

    def fitness(batch):
        return np.asarray(_map_batch(eval_one, batch, cfg.threads), dtype=float)

    return fitness


# ---------------------------------------------------------------------------
# stage 1: shared pool scoring


@dataclass
class SeedStageReport:
    target: str
    truncation: int
    pool_size: int
    survivors: list
    survivor_scores: list
    pool_mean_score: float
    top100_mean_score: float
    used_surrogate: bool
    wall_time_s: float

    def comparable(self) -> dict:
        d = self.to_dict()
        d.pop("wall_time_s")
        return d

    def to_dict(self) -> dict:
        return {
            "kind": "seed_stage",
            "target": self.target,
            "truncation": self.truncation,
            "pool_size": self.pool_size,
            "survivors": self.survivors,
            "survivor_scores": self.survivor_scores,
            "pool_mean_score": self.pool_mean_score,
            "top100_mean_score": self.top100_mean_score,
            "used_surrogate": self.used_surrogate,
            "wall_time_s": self.wall_time_s,
        }

    @staticmethod
    def from_dict(d: dict) -> "SeedStageReport":
        d = {k: v for k, v in d.items() if k != "kind"}
        return SeedStageReport(**d)


def build_pool(cfg: SearchConfig) -> list:
    rng = np.random.default_rng((cfg.seed, 0))
    return [gn.random_genome(rng) for _ in range(cfg.seed_pool)]


def score_pool(pool, cfg: SearchConfig, model=None):
    """Score every genome for every target category at the seed truncation.

    With a surrogate ``model`` the score is the class probability of the
    heralded state; otherwise it is the true grid fidelity. Returns
    ``(scores, herald)`` with scores of shape ``(len(pool), n_targets)``.
    """
    t = cfg.stage1_truncation
    herald = np.zeros(len(pool))
    if model is not None:
        feats = np.zeros((len(pool), clf.FEATURE_DIM))
        ok = np.zeros(len(pool), dtype=bool)

        def eval_one(i):
            try:
                res = run_experiment(gn.decode(pool[i]), t, cfg.herald_floor)
            except HeraldkitError:
                return
            feats[i] = clf.state_features(res.amplitudes)
            herald[i] = res.herald_probability
            ok[i] = True

        _map_batch(eval_one, range(len(pool)), cfg.threads)
        scores = np.zeros((len(pool), len(SEARCHABLE_TARGETS)))
        if ok.any():
            probs = clf.predict_proba(model, feats[ok])
            scores[ok] = probs[:, : len(SEARCHABLE_TARGETS)]
        return scores, herald

    banks = {
        name: targets.build_bank(grid, t) for name, grid in targets.default_grids().items()
    }
    scores = np.zeros((len(pool), len(SEARCHABLE_TARGETS)))

    def eval_one(i):
        try:
            res = run_experiment(gn.decode(pool[i]), t, cfg.herald_floor)
        except HeraldkitError:
            return
        herald[i] = res.herald_probability
        for j, name in enumerate(SEARCHABLE_TARGETS):
            scores[i, j] = targets.best_fidelity_over_grid(res.amplitudes, banks[name])[0]

    _map_batch(eval_one, range(len(pool)), cfg.threads)
    return scores, herald


def select_survivors(pool, scores, herald, count: int):
    """Top genomes by score with herald probability as the tie-breaker."""
    order = np.lexsort((-herald, -scores))
    return [pool[i] for i in order[:count]], [float(scores[i]) for i in order[:count]]


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class PipelineResult:
    config: dict
    target: str
    seed: int
    stages: list = field(default_factory=list)
    best_experiment: dict = field(default_factory=dict)
    best_genome: dict = field(default_factory=dict)
    herald_probability: float = 0.0
    final_truncation: int = 0
    grid_fidelity: float = 0.0
    grid_params: dict = field(default_factory=dict)
    polished_fidelity: float = 0.0
    polished_params: dict = field(default_factory=dict)
    wall_time_s: float = 0.0

    def comparable(self) -> dict:
        d = self.to_dict()
        d.pop("wall_time_s")
        d["stages"] = [
            {k: v for k, v in s.items() if k != "wall_time_s"} for s in d["stages"]
        ]
        return d

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "target": self.target,
            "seed": self.seed,
            "stages": self.stages,
            "best_experiment": self.best_experiment,
            "best_genome": self.best_genome,
            "herald_probability": self.herald_probability,
            "final_truncation": self.final_truncation,
            "grid_fidelity": self.grid_fidelity,
            "grid_params": self.grid_params,
            "polished_fidelity": self.polished_fidelity,
            "polished_params": self.polished_params,
            "wall_time_s": self.wall_time_s,
        }


def _jsonl_append(path, record: dict):
    with open(path, "a") as f:
        f.write(json.dumps(record, sort_keys=True) + "\n")


def _load_jsonl(path):
    if not os.path.exists(path):
        return []
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def run_pipeline(
    cfg: SearchConfig,
    model=None,
    report_path=None,
    resume: bool = False,
) -> PipelineResult:
    """Run the full three-stage search for ``cfg.target``.

    When ``report_path`` is given, a JSONL record is appended after each
    stage; with ``resume=True`` records already present for the same
    config are reused instead of recomputed.
    """
    t0 = time.perf_counter()
    target_index = SEARCHABLE_TARGETS.index(cfg.target)
    header = {"kind": "header", "config": cfg.to_dict()}
    done = {}
    if report_path and resume:
        records = _load_jsonl(report_path)
        if records:
            if records[0] != header:
                raise ConfigError(
                    f"existing report {report_path} was produced by a different config"
                )
            for rec in records[1:]:
                done[rec.get("kind"), rec.get("stage", 0)] = rec
    if report_path and not done:
        with open(report_path, "w") as f:
            f.write(json.dumps(header, sort_keys=True) + "\n")

    grid = targets.default_grids()[cfg.target]

    # stage 1: score one shared random pool
    if ("seed_stage", 0) in done:
        seed_report = SeedStageReport.from_dict(done["seed_stage", 0])
        survivors = [gn.Genome.from_dict(d) for d in seed_report.survivors]
    else:
        t_stage = time.perf_counter()
        pool = build_pool(cfg)
        scores, herald = score_pool(pool, cfg, model=model)
        col = scores[:, target_index]
        survivors, survivor_scores = select_survivors(
            pool, col, herald, cfg.stage2_population
        )
        top100 = np.sort(col)[::-1][: min(100, col.size)]
        seed_report = SeedStageReport(
            target=cfg.target,
            truncation=cfg.stage1_truncation,
            pool_size=cfg.seed_pool,
            survivors=[g.to_dict() for g in survivors],
            survivor_scores=survivor_scores,
            pool_mean_score=float(np.mean(col)),
            top100_mean_score=float(np.mean(top100)),
            used_surrogate=model is not None,
            wall_time_s=time.perf_counter() - t_stage,
        )
        if report_path:
            _jsonl_append(report_path, seed_report.to_dict())
    log.info(
        "stage 1 done: pool mean %.4g, top-100 mean %.4g",
        seed_report.pool_mean_score,
        seed_report.top100_mean_score,
    )

    # stage 2: evolve against the grid at the working truncation
    if ("ga_stage", 2) in done:
        stage2 = GAStageReport.from_dict(done["ga_stage", 2])
    else:
        bank2 = targets.build_bank(grid, cfg.stage2_truncation)
        stage2 = run_ga_stage(
            survivors,
            make_grid_fitness(bank2, cfg.stage2_truncation, cfg),
            cfg,
            stage=2,
            target_index=target_index,
            truncation_label=str(cfg.stage2_truncation),
        )
        if report_path:
            _jsonl_append(report_path, stage2.to_dict())
    log.info("stage 2 done: best %.6f", stage2.best_fitness)

    # stage 3: adaptive truncation refinement of the leaders
    if ("ga_stage", 3) in done:
        stage3 = GAStageReport.from_dict(done["ga_stage", 3])
    else:
        pop2 = [gn.Genome.from_dict(d) for d in stage2.final_population]
        fit2 = np.asarray(stage2.final_fitness)
        order = np.argsort(-fit2, kind="stable")[: cfg.stage3_population]
        bank3 = targets.build_bank(grid, cfg.stage3_truncations[-1])
        stage3 = run_ga_stage(
            [pop2[i] for i in order],
            make_adaptive_fitness(bank3, cfg),
            cfg,
            stage=3,
            target_index=target_index,
            truncation_label="adaptive",
        )
        if report_path:
            _jsonl_append(report_path, stage3.to_dict())
    log.info("stage 3 done: best %.6f", stage3.best_fitness)

    # final: evaluate the winner at the top truncation and polish the target
    pop3 = [gn.Genome.from_dict(d) for d in stage3.final_population]
    fit3 = np.asarray(stage3.final_fitness)
    winner = pop3[int(np.argmax(fit3))]
    exp = gn.decode(winner)
    bank3 = targets.build_bank(grid, cfg.stage3_truncations[-1])
    res = None
    for t in reversed(cfg.stage3_truncations):
        try:
            res = run_experiment(exp, t, cfg.herald_floor)
            break
        except HeraldkitError:
            continue
    if res is None:
        raise HeraldkitError("the selected genome failed at every truncation")
    grid_f, grid_idx = targets.best_fidelity_over_grid(res.amplitudes, bank3)
    grid_params = bank3.grid.point(grid_idx)
    polished_params, polished_f = targets.polish(
        res.amplitudes,
        cfg.target,
        grid_params,
        bank3.grid.steps(),
        bank3.truncation,
        sweeps=cfg.polish_sweeps,
    )

    result = PipelineResult(
        config=cfg.to_dict(),
        target=cfg.target,
        seed=cfg.seed,
        stages=[seed_report.to_dict(), stage2.to_dict(), stage3.to_dict()],
        best_experiment=exp.to_dict(),
        best_genome=gn.canonical(winner).to_dict(),
        herald_probability=res.herald_probability,
        final_truncation=res.truncation,
        grid_fidelity=grid_f,
        grid_params=grid_params,
        polished_fidelity=polished_f,
        polished_params=polished_params,
        wall_time_s=time.perf_counter() - t0,
    )
    if report_path:
        _jsonl_append(report_path, {"kind": "result", **result.to_dict()})
    return result
