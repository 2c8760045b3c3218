"""Parent-set and candidate-DAG evaluation protocols.

Wrong parent addition
    Pick a confounded node, score its true parent set against the true set
    plus one wrong confounded node, for ``M`` different wrong nodes.
Correct parent deletion
    Pick a node with observed parents, score its true parent set against
    every single-parent deletion.
Candidate DAGs
    Score the true DAG and ``M`` randomly perturbed copies; report the
    posterior-weighted SHD and the SHD of the best-scoring candidate.

A *method* is either a :class:`~deconfound.scores.ScoreKind` (scored through a
shared :class:`~deconfound.scores.Scorer`) or a callable ``f(j, parents) -> float``.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .graph import Dag
from .pcss import PcssConfig, pcss
from .scm import Dataset, ScmConfig, ScmInstance, generate
from .scores import ScoreKind, Scorer, SingularConditioningError, log_odds, posterior_over_candidates
from .seeding import derive_seed


class InsufficientCandidatesError(ValueError):
    pass


class PerturbationError(RuntimeError):
    pass


class Task(str, enum.Enum):
    WRONG_PARENT_ADDITION = "wrong_parent_addition"
    CORRECT_PARENT_DELETION = "correct_parent_deletion"
    CANDIDATE_DAGS = "candidate_dags"


@dataclass(frozen=True)
class TaskSpec:
    task: Task
    M: int = 100
    methods: tuple = (ScoreKind.VANILLA_BIC, ScoreKind.PCSS_BIC)
    seeds: tuple = (0,)
    scm: ScmConfig = field(default_factory=lambda: ScmConfig(p=50))
    N: int = 100
    pcss_m: Optional[int] = None
    perturb_steps: int = 5
    gp_iters: int = 100
    gp_step: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "methods", tuple(ScoreKind(m) for m in self.methods))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not self.methods:
            raise ValueError("methods must be non-empty")

    @property
    def resolved_pcss_m(self) -> int:
        # one component for linear data, three otherwise
        if self.pcss_m is not None:
            return self.pcss_m
        return 1 if self.scm.linear_only else 3


@dataclass
class MethodResult:
    true_score: float
    candidate_scores: list[float]
    prop_wrong_beats_true: float
    max_log_odds: float
    avg_posterior_shd: Optional[float] = None
    map_shd: Optional[int] = None
    n_degenerate: int = 0


@dataclass
class TaskReport:
    task: Task
    seed: int
    target: Optional[int]
    true_parents: Optional[list[int]]
    candidates: list  # parent sets, or DAG edge lists for the DAG task
    methods: dict[str, MethodResult]
    M_requested: int = 0
    M_used: int = 0
    candidate_shd: Optional[list[int]] = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["task"] = self.task.value
        return out

    def rows(self):
        """Flat ``(method, seed, metric, value)`` records."""
        for name, res in self.methods.items():
            yield name, self.seed, "prop_wrong_beats_true", res.prop_wrong_beats_true
            yield name, self.seed, "max_log_odds", res.max_log_odds
            if res.avg_posterior_shd is not None:
                yield name, self.seed, "avg_posterior_shd", res.avg_posterior_shd
                yield name, self.seed, "map_shd", res.map_shd


def _method_name(m) -> str:
    if isinstance(m, (ScoreKind, str)):
        return ScoreKind(m).value
    return getattr(m, "__name__", repr(m))


def _resolve(methods, scorer: Optional[Scorer]) -> dict[str, Callable]:
    out = {}
    for m in methods:
        if callable(m) and not isinstance(m, (ScoreKind, str)):
            out[_method_name(m)] = m
        else:
            if scorer is None:
                raise ValueError("a Scorer is required for score-kind methods")
            kind = ScoreKind(m)
            out[kind.value] = lambda j, P, kind=kind: _safe_score(scorer, kind, j, P)
    return out


def _safe_score(scorer: Scorer, kind: ScoreKind, j, P) -> float:
    # an exactly determined node (rank-deficient residual covariance) gets zero posterior mass
    try:
        return scorer(kind, j, P)
    except SingularConditioningError:
        return -np.inf


def default_scorer(dataset: Dataset, pcss_m: int, gp_iters: int = 100, gp_step: float = 0.01) -> Scorer:
    S_hat = pcss(dataset.X, PcssConfig(M=pcss_m))
    return Scorer(dataset.X, S_hat, dataset.H, gp_iters=gp_iters, gp_step=gp_step)


def _parent_set_report(task, seed, target, true_pa, candidates, methods, M_req) -> TaskReport:
    results = {}
    for name, fn in methods.items():
        true_score = float(fn(target, true_pa))
        cand = [float(fn(target, P)) for P in candidates]
        lo = log_odds(cand, true_score)
        results[name] = MethodResult(
            true_score=true_score,
            candidate_scores=cand,
            prop_wrong_beats_true=float(np.mean(lo > 0)),
            max_log_odds=float(lo.max()),
            n_degenerate=int(np.sum(np.isneginf([true_score, *cand]))),
        )
    return TaskReport(task, seed, target, list(true_pa), [list(P) for P in candidates], results,
                      M_requested=M_req, M_used=len(candidates))


def wrong_parent_addition(
    dataset: Dataset, instance: ScmInstance, M: int, methods: Sequence, rng_seed: int,
    scorer: Optional[Scorer] = None,
) -> TaskReport:
    rng = np.random.default_rng(rng_seed)
    dag = instance.dag
    C = [int(c) for c in instance.attachment.confounded_nodes()]
    pools = {j: [c for c in C if c != j and c not in dag.parents[j]] for j in C}
    eligible = [j for j in C if pools[j]]
    if len(C) < 2 or not eligible:
        raise InsufficientCandidatesError("need a confounded node with at least one wrong candidate")
    target = int(rng.choice(eligible))
    pool = pools[target]
    wrong = rng.choice(pool, size=min(M, len(pool)), replace=False)
    true_pa = list(dag.parents[target])
    candidates = [sorted(true_pa + [int(r)]) for r in wrong]
    return _parent_set_report(Task.WRONG_PARENT_ADDITION, rng_seed, target, true_pa, candidates,
                              _resolve(methods, scorer), M)


def correct_parent_deletion(
    dataset: Dataset, instance: ScmInstance, methods: Sequence, rng_seed: int,
    scorer: Optional[Scorer] = None,
) -> TaskReport:
    rng = np.random.default_rng(rng_seed)
    dag = instance.dag
    eligible = [j for j in range(dag.p) if dag.parents[j]]
    if not eligible:
        raise InsufficientCandidatesError("no node has an observed parent")
    target = int(rng.choice(eligible))
    true_pa = list(dag.parents[target])
    candidates = [[q for q in true_pa if q != i] for i in true_pa]
    return _parent_set_report(Task.CORRECT_PARENT_DELETION, rng_seed, target, true_pa, candidates,
                              _resolve(methods, scorer), len(candidates))


def shd(g1: Dag, g2: Dag) -> int:
    """Structural Hamming distance; a reversed edge counts once."""
    if g1.p != g2.p:
        raise ValueError("graphs have different node counts")
    A, B = g1.adjacency(), g2.adjacency()
    # per unordered pair: absent / i->j / j->i must agree
    diff = (A != B) | (A.T != B.T)
    return int(np.triu(diff, k=1).sum())


def _reachability(A: np.ndarray) -> np.ndarray:
    """``R[i, j]`` true iff a directed path of length >= 1 leads from ``i`` to ``j``."""
    R = A.copy()
    for k in range(A.shape[0]):
        R |= R[:, [k]] & R[[k], :]
    return R


def perturb_dag(dag: Dag, steps: int, rng) -> Dag:
    """Apply ``steps`` random single-edge additions or deletions, keeping acyclicity.

    Each step picks add or delete with equal probability (when both are
    possible), then a legal edit of that type uniformly.
    """
    if steps and dag.p < 2:
        raise PerturbationError("cannot perturb a graph with fewer than two nodes")
    A = dag.adjacency()
    for _ in range(steps):
        R = _reachability(A)
        # i -> j is legal iff j does not already reach i
        can_add = ~A & ~A.T & ~R.T
        np.fill_diagonal(can_add, False)
        moves = [m for m in (np.argwhere(can_add), np.argwhere(A)) if len(m)]
        if not moves:
            raise PerturbationError("no legal edit available")
        group = moves[rng.integers(len(moves))]
        i, j = group[rng.integers(len(group))]
        A[i, j] = not A[i, j]
    return Dag.from_adjacency(A)


def candidate_dag_task(
    dataset: Dataset, instance: ScmInstance, M: int, perturb_steps: int, methods: Sequence,
    rng_seed: int, scorer: Optional[Scorer] = None,
) -> TaskReport:
    """Score the true DAG (index 0) against ``M`` perturbed DAGs."""
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = np.random.default_rng(rng_seed)
    truth = instance.dag
    pool = [truth] + [perturb_dag(truth, perturb_steps, rng) for _ in range(M)]
    dists = np.array([shd(g, truth) for g in pool])
    results = {}
    for name, fn in _resolve(methods, scorer).items():
        scores = np.array([sum(fn(j, g.parents[j]) for j in range(g.p)) for g in pool], dtype=float)
        post = posterior_over_candidates(scores)
        lo = log_odds(scores[1:], scores[0])
        results[name] = MethodResult(
            true_score=float(scores[0]),
            candidate_scores=scores[1:].tolist(),
            prop_wrong_beats_true=float(np.mean(lo > 0)),
            max_log_odds=float(lo.max()),
            avg_posterior_shd=float(post @ dists),
            map_shd=int(dists[int(np.argmax(scores))]),
            n_degenerate=int(np.sum(np.isneginf(scores))),
        )
    return TaskReport(Task.CANDIDATE_DAGS, rng_seed, None, None, [g.edges for g in pool[1:]], results,
                      M_requested=M, M_used=M, candidate_shd=dists[1:].tolist())


def run_replicate(spec: TaskSpec, seed: int) -> TaskReport:
    """Generate one dataset from ``seed`` and run the task on it."""
    inst, data = generate(spec.scm, spec.N, derive_seed(seed, "data"))
    scorer = default_scorer(data, spec.resolved_pcss_m, spec.gp_iters, spec.gp_step)
    task_seed = derive_seed(seed, spec.task.value)
    if spec.task is Task.WRONG_PARENT_ADDITION:
        report = wrong_parent_addition(data, inst, spec.M, spec.methods, task_seed, scorer)
    elif spec.task is Task.CORRECT_PARENT_DELETION:
        report = correct_parent_deletion(data, inst, spec.methods, task_seed, scorer)
    else:
        report = candidate_dag_task(data, inst, spec.M, spec.perturb_steps, spec.methods, task_seed, scorer)
    report.seed = int(seed)
    return report


def _run_one(args):
    return run_replicate(*args)


def run_task(spec: TaskSpec, workers: int = 1) -> list[TaskReport]:
    """All replicates of ``spec``, ordered by seed regardless of ``workers``."""
    jobs = [(spec, s) for s in spec.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def summarize(reports: Sequence[TaskReport]) -> dict[str, dict[str, float]]:
    """Median of every metric per method across replicates."""
    acc: dict[str, dict[str, list]] = {}
    for rep in reports:
        for method, _, metric, value in rep.rows():
            acc.setdefault(method, {}).setdefault(metric, []).append(value)
    return {m: {k: float(np.median(v)) for k, v in d.items()} for m, d in acc.items()}
