"""
Divide-and-conquer KRR with Newton-Raphson communication rounds.

The training flow runs in two phases.

Setup (once)
    1. every machine j fits KRR on its shard, keeps the factor of
       ``K_jj + lam |D_j| I``, its coefficients ``alpha_j`` and the cross-Gram
       blocks ``K_{D_k, D_j}`` against every shard's inputs;
    2. the coordinator averages the cross-predictions ``K_{D_k,D_j} alpha_j``
       with weights ``|D_j| / |D|`` into the block vectors ``f0_k``.

Round l = 1..L
    4. machine j sends ``K_{D_k,D_j} (f_j - y_j) / |D_j| + lam f_k`` for every k;
    5. the coordinator averages them into the global gradient ``G_k``;
    6. machine j solves KRR on gradient data, ``beta_j = M_j G_j``, and returns
       ``H_{j,k} = G_k - K_{D_k,D_j} beta_j``;
    7. the coordinator sets ``f_k <- f_k - (1/lam) sum_j w_j H_{j,k}``.

Machines only ever hand vectors to the coordinator; raw outputs ``y_j`` never
leave machine j.  The single exception is the setup broadcast of shard inputs.

Prediction at new points replays the same recursion with the stored ``beta``
and iterate vectors.  ``oracle_coefficient_iteration`` recomputes everything
in the span of all training kernel sections, via the operator form of the
update, as an independent check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset, Partition
from .errors import InvalidInputError, InvalidStateError
from .kernel import KernelSpec, as_points, gram
from .krr import SpdFactor, shifted_gram_factor

__all__ = [
    "CommEvent",
    "CommLog",
    "LocalState",
    "DkrrModel",
    "OracleResult",
    "DIVERGENCE_THRESHOLD",
    "train_local",
    "local_predictions",
    "synthesize_initial",
    "local_gradient",
    "synthesize_gradient",
    "local_newton_correction",
    "global_update",
    "run_dkrr",
    "block_offsets",
    "split_blocks",
    "predict_dkrr",
    "oracle_coefficient_iteration",
    "comm_totals",
    "iterate_distances",
    "krr_fitted_blocks",
]

DIVERGENCE_THRESHOLD = 1e12

UPLINK = "local->global"
DOWNLINK = "global->local"


@dataclass(frozen=True)
class CommEvent:
    round: int
    step: int
    direction: str
    floats: int


@dataclass
class CommLog:
    """Counts of real numbers moved between machines and the coordinator.

    Round 0 holds the one-time setup traffic (input broadcast, step 2).
    """

    events: list[CommEvent] = field(default_factory=list)

    def record(self, round: int, step: int, direction: str, floats: int) -> None:
        self.events.append(CommEvent(round, step, direction, int(floats)))

    def step_total(self, round: int, step: int) -> int:
        return sum(e.floats for e in self.events if e.round == round and e.step == step)

    def round_total(self, round: int) -> int:
        return sum(e.floats for e in self.events if e.round == round and e.step >= 2)

    def broadcast_total(self) -> int:
        return sum(e.floats for e in self.events if e.step == 1)

    @property
    def rounds(self) -> int:
        return max((e.round for e in self.events), default=0)

    def total(self) -> int:
        """All traffic except the input broadcast."""
        return sum(e.floats for e in self.events if e.step >= 2)


@dataclass
class LocalState:
    """Everything machine j keeps after setup.  Not mutated afterwards.

    ``cross`` stacks the blocks ``K_{D_k, D_j}`` for k = 0..m-1 vertically, so
    it has shape ``(N, |D_j|)`` and block k occupies rows
    ``offsets[k]:offsets[k + 1]``.
    """

    shard_id: int
    inputs: np.ndarray
    outputs: np.ndarray
    lam: float
    factor: SpdFactor
    alpha: np.ndarray
    cross: np.ndarray
    offsets: np.ndarray
    kernel: KernelSpec

    @property
    def size(self) -> int:
        return self.outputs.shape[0]

    @property
    def own(self) -> slice:
        return slice(int(self.offsets[self.shard_id]), int(self.offsets[self.shard_id + 1]))

    def block(self, k: int) -> np.ndarray:
        """``K_{D_k, D_j}``."""
        return self.cross[self.offsets[k] : self.offsets[k + 1]]


def block_offsets(sizes: Sequence[int]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.intp)


def split_blocks(vec: np.ndarray, offsets: np.ndarray) -> list[np.ndarray]:
    """Cut a block-ordered vector into its per-shard pieces."""
    return [vec[offsets[k] : offsets[k + 1]] for k in range(len(offsets) - 1)]


@dataclass
class DkrrModel:
    """Trained DKRR(l) artifact.

    Training-point vectors are stored block-ordered: entries of shard 0 first,
    then shard 1, and so on (``order`` maps positions back to sample indices).
    ``iterates[l]`` is the estimator after l rounds on all training points and
    ``betas[l - 1][j]`` the step-6 coefficients of machine j in round l.
    """

    kernel: KernelSpec
    lam: float
    weights: np.ndarray
    locals: list[LocalState]
    shards: list[np.ndarray]
    iterates: list[np.ndarray]
    betas: list[list[np.ndarray]]
    rounds_requested: int
    diverged: bool = False
    comm: CommLog = field(default_factory=CommLog)
    timings: list[tuple[str, int, np.ndarray]] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.locals)

    @property
    def n(self) -> int:
        return int(sum(loc.size for loc in self.locals))

    @property
    def offsets(self) -> np.ndarray:
        return self.locals[0].offsets

    @property
    def order(self) -> np.ndarray:
        return np.concatenate(self.shards)

    @property
    def rounds_completed(self) -> int:
        return len(self.iterates) - 1

    def block(self, ell: int, k: int) -> np.ndarray:
        """Iterate ``ell`` on shard k."""
        off = self.offsets
        return self.iterates[ell][off[k] : off[k + 1]]

    def fitted(self, ell: int | None = None) -> np.ndarray:
        """Iterate ``ell`` (default: last) scattered back to the original sample order."""
        ell = self.rounds_completed if ell is None else ell
        out = np.empty(self.n)
        out[self.order] = self.iterates[ell]
        return out

    def parallel_time(self, rounds: int | None = None) -> float:
        """Simulated wall time: per phase the slowest machine, plus coordinator phases.

        ``rounds`` limits the sum to setup plus the first ``rounds`` rounds.
        """
        rounds = self.rounds_completed if rounds is None else rounds
        return float(sum(np.max(t) for _, r, t in self.timings if r <= rounds))

    def phase_times(self, phase: str) -> np.ndarray:
        rows = [t for p, _, t in self.timings if p == phase]
        return np.sum(rows, axis=0) if rows else np.zeros(0)


def train_local(
    shard_id: int,
    shard: Dataset,
    all_inputs: Sequence[np.ndarray],
    kernel: KernelSpec,
    lam: float,
    log: CommLog | None = None,
    cross: np.ndarray | None = None,
    timings: dict | None = None,
) -> LocalState:
    """Step 1 on machine ``shard_id``.

    ``all_inputs[k]`` are the inputs of shard k (received by broadcast).  The
    stacked cross-Gram matrix may be supplied precomputed through ``cross``.
    """
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    offsets = block_offsets([len(X) for X in all_inputs])
    n_total = int(offsets[-1])
    t0 = time.perf_counter()
    if cross is None:
        stacked = np.concatenate([as_points(X) for X in all_inputs])
        cross = gram(kernel, stacked, shard.inputs)
    else:
        cross = np.asarray(cross, dtype=np.float64)
    if cross.shape != (n_total, len(shard)):
        raise InvalidInputError(f"cross-Gram has shape {cross.shape}, expected {(n_total, len(shard))}")
    t1 = time.perf_counter()
    own = cross[offsets[shard_id] : offsets[shard_id + 1]]
    factor = shifted_gram_factor(own, lam)
    alpha = factor.solve(shard.outputs)
    t2 = time.perf_counter()
    if timings is not None:
        timings["kernel"] = t1 - t0
        timings["factor"] = t2 - t1
    if log is not None:
        log.record(0, 1, UPLINK, len(shard) * shard.dim * (len(all_inputs) - 1))
    return LocalState(shard_id, shard.inputs, shard.outputs, float(lam), factor, alpha, cross, offsets, kernel)


def local_predictions(local: LocalState) -> np.ndarray:
    """Machine side of step 2: ``K_{D_k,D_j} alpha_j`` for every block k, block-ordered."""
    return local.cross @ local.alpha


def _weights(locals: Sequence[LocalState]) -> np.ndarray:
    sizes = np.array([loc.size for loc in locals], dtype=np.float64)
    return sizes / sizes.sum()


def _check_flat(vec, n: int, what: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (n,):
        raise InvalidInputError(f"{what} has shape {vec.shape}, expected ({n},)")
    return vec


def synthesize_initial(
    locals: Sequence[LocalState],
    log: CommLog | None = None,
    predictions: Sequence[np.ndarray] | None = None,
) -> np.ndarray:
    """Step 2: the plain DKRR estimator on every training point (block-ordered)."""
    if not locals:
        raise InvalidInputError("need at least one local machine")
    w = _weights(locals)
    if predictions is None:
        predictions = [local_predictions(loc) for loc in locals]
    f0 = w @ np.vstack(predictions)
    if log is not None:
        log.record(0, 2, UPLINK, len(locals) * f0.shape[0])
    return f0


def local_gradient(local: LocalState, f_prev: np.ndarray, lam: float | None = None) -> np.ndarray:
    """Step 4 on machine j: its contribution to the global gradient at every training point.

    ``(K_{D_k,D_j} / |D_j|) (f_prev|D_j - y_j) + lam f_prev|D_k``, block-ordered.
    """
    lam = local.lam if lam is None else lam
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    f_prev = _check_flat(f_prev, local.cross.shape[0], "f_prev")
    resid = (f_prev[local.own] - local.outputs) / local.size
    return local.cross @ resid + lam * f_prev


def synthesize_gradient(
    per_machine: Sequence[np.ndarray],
    weights: np.ndarray,
    log: CommLog | None = None,
    round: int = 0,
) -> np.ndarray:
    """Step 5: weighted average of the machines' gradient vectors."""
    stack = np.vstack(per_machine)
    G = np.asarray(weights) @ stack
    if log is not None:
        m, n = stack.shape
        log.record(round, 4, UPLINK, m * n)
        log.record(round, 5, DOWNLINK, m * n)
    return G


def local_newton_correction(local: LocalState, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Step 6 on machine j: KRR on the gradient data.

    Returns ``(H, beta)`` with ``beta = M_j G|D_j`` and ``H = G - K_{D,D_j} beta``.
    """
    G = _check_flat(G, local.cross.shape[0], "G")
    beta = local.factor.solve(G[local.own])
    return G - local.cross @ beta, beta


def global_update(
    f_prev: np.ndarray,
    corrections: Sequence[np.ndarray],
    lam: float,
    weights: np.ndarray,
    log: CommLog | None = None,
    round: int = 0,
) -> tuple[np.ndarray, bool]:
    """Step 7: ``f - (1/lam) sum_j w_j H_j``.  Returns the new vector and a divergence flag."""
    stack = np.vstack(corrections)
    f_new = f_prev - (np.asarray(weights) @ stack) / lam
    diverged = bool(not np.all(np.isfinite(f_new)) or np.any(np.abs(f_new) > DIVERGENCE_THRESHOLD))
    if log is not None:
        m, n = stack.shape
        log.record(round, 6, UPLINK, m * n)
        log.record(round, 7, DOWNLINK, n)
    return f_new, diverged


def run_dkrr(
    data: Dataset,
    partition: Partition,
    kernel: KernelSpec,
    lam: float,
    rounds: int,
    *,
    init: np.ndarray | None = None,
    gram_cache: np.ndarray | None = None,
    crosses: Sequence[np.ndarray] | None = None,
) -> DkrrModel:
    """Train DKRR (``rounds = 0``) or DKRR(l) with ``rounds`` communication rounds.

    ``gram_cache`` is an optional full N x N Gram matrix of ``data.inputs``
    from which the cross blocks are sliced instead of re-evaluated;
    ``crosses`` goes further and hands every machine its stacked cross-Gram
    matrix directly (e.g. reused across a lambda sweep).  ``init``
    (block-ordered) overrides the step-2 vector, e.g. to start from a known
    point.  Divergence stops the loop and sets ``model.diverged``; the
    offending round is not stored.
    """
    if rounds < 0:
        raise InvalidInputError(f"rounds must be >= 0, got {rounds}")
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    partition.validate(len(data))
    shards = partition.shards
    m = len(shards)
    order = np.concatenate(shards)
    all_inputs = [data.inputs[idx] for idx in shards]
    log = CommLog()
    timings: list[tuple[str, int, np.ndarray]] = []

    locals_: list[LocalState] = []
    t_kernel = np.zeros(m)
    t_factor = np.zeros(m)
    for j, idx in enumerate(shards):
        cross = None if crosses is None else crosses[j]
        if cross is None and gram_cache is not None:
            t0 = time.perf_counter()
            cross = gram_cache[np.ix_(order, idx)]
            t_kernel[j] += time.perf_counter() - t0
        tm: dict = {}
        locals_.append(
            train_local(j, data.subset(idx), all_inputs, kernel, lam, log=log, cross=cross, timings=tm)
        )
        t_kernel[j] += tm["kernel"]
        t_factor[j] = tm["factor"]
    timings.append(("step1_kernel", 0, t_kernel))
    timings.append(("step1_factor", 0, t_factor))

    preds, t_pred = [], np.zeros(m)
    for j, loc in enumerate(locals_):
        t0 = time.perf_counter()
        preds.append(local_predictions(loc))
        t_pred[j] = time.perf_counter() - t0
    timings.append(("step1_predict", 0, t_pred))
    t0 = time.perf_counter()
    f = synthesize_initial(locals_, log=log, predictions=preds)
    timings.append(("step2", 0, np.array([time.perf_counter() - t0])))
    if init is not None:
        f = _check_flat(init, len(data), "init").copy()

    w = _weights(locals_)
    model = DkrrModel(kernel, float(lam), w, locals_, list(shards), [f], [], rounds, comm=log, timings=timings)

    for ell in range(1, rounds + 1):
        grads, t4 = [], np.zeros(m)
        for j, loc in enumerate(locals_):
            t0 = time.perf_counter()
            grads.append(local_gradient(loc, f, lam))
            t4[j] = time.perf_counter() - t0
        t0 = time.perf_counter()
        G = synthesize_gradient(grads, w, log=log, round=ell)
        t5 = time.perf_counter() - t0
        corr, betas, t6 = [], [], np.zeros(m)
        for j, loc in enumerate(locals_):
            t0 = time.perf_counter()
            H, beta = local_newton_correction(loc, G)
            t6[j] = time.perf_counter() - t0
            corr.append(H)
            betas.append(beta)
        t0 = time.perf_counter()
        f_new, diverged = global_update(f, corr, lam, w, log=log, round=ell)
        t7 = time.perf_counter() - t0
        timings.extend(
            [("step4", ell, t4), ("step5", ell, np.array([t5])), ("step6", ell, t6), ("step7", ell, np.array([t7]))]
        )
        if diverged:
            model.diverged = True
            break
        f = f_new
        model.iterates.append(f)
        model.betas.append(betas)
    return model


def predict_dkrr(
    model: DkrrModel,
    query,
    rounds: int | None = None,
    all_rounds: bool = False,
    query_gram: np.ndarray | None = None,
) -> np.ndarray:
    """Testing flow: evaluate the round-``rounds`` estimator (default: last completed) at ``query``.

    With ``all_rounds`` the result has shape ``(rounds + 1, n_query)``, row l
    holding the estimator after l rounds.  ``query_gram`` optionally supplies
    ``K(query, training inputs)`` with columns in original sample order.
    """
    rounds = model.rounds_completed if rounds is None else rounds
    if rounds < 0 or rounds > model.rounds_completed:
        raise InvalidStateError(
            f"model has {model.rounds_completed} completed rounds, {rounds} requested"
        )
    Q = as_points(query, dim=model.locals[0].inputs.shape[1])
    w = model.weights
    lam = model.lam
    if query_gram is None:
        Kq = [gram(model.kernel, Q, loc.inputs) for loc in model.locals]
    else:
        if query_gram.shape != (Q.shape[0], model.n):
            raise InvalidInputError(f"query_gram has shape {query_gram.shape}")
        Kq = [query_gram[:, idx] for idx in model.shards]
    f = sum(w[j] * (Kq[j] @ loc.alpha) for j, loc in enumerate(model.locals))
    history = [f]
    for ell in range(1, rounds + 1):
        prev = model.iterates[ell - 1]
        G = sum(
            w[j] * (Kq[j] @ ((prev[loc.own] - loc.outputs) / loc.size) + lam * f)
            for j, loc in enumerate(model.locals)
        )
        corr = sum(w[j] * (G - Kq[j] @ model.betas[ell - 1][j]) for j in range(model.m))
        f = f - corr / lam
        history.append(f)
    return np.vstack(history) if all_rounds else f


@dataclass
class OracleResult:
    anchors: np.ndarray
    coefficients: np.ndarray  # shape (L + 1, N); row l represents the round-l estimator
    kernel: KernelSpec

    def predict(self, query, ell: int | None = None) -> np.ndarray:
        ell = self.coefficients.shape[0] - 1 if ell is None else ell
        Q = as_points(query, dim=self.anchors.shape[1])
        return gram(self.kernel, Q, self.anchors) @ self.coefficients[ell]

    def predict_all(self, query) -> np.ndarray:
        Q = as_points(query, dim=self.anchors.shape[1])
        return self.coefficients @ gram(self.kernel, Q, self.anchors).T


def oracle_coefficient_iteration(
    data: Dataset,
    partition: Partition,
    kernel: KernelSpec,
    lam: float,
    rounds: int,
    max_n: int = 2000,
) -> OracleResult:
    """Operator-form recursion carried out on coefficients over all N kernel sections.

    A function ``f = sum_i c_i K(x_i, .)`` is represented by ``c``.  Then
    ``L_{K,D} f -> K c / N``, ``S_D^T y -> y / N`` and
    ``(L_{K,D_j} + lam I)^{-1} u`` is obtained by solving the small system
    ``(lam I + K_jj / n_j) h = (K u)|_{D_j}`` for the values h on D_j and
    returning ``(u - e_j(h) / n_j) / lam``.
    """
    N = len(data)
    if N > max_n:
        raise InvalidInputError(f"oracle is limited to N <= {max_n}, got {N}")
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    partition.validate(N)
    K = gram(kernel, data.inputs)
    y = data.outputs
    shards = partition.shards
    w = partition.weights()
    systems = [lam * np.eye(len(idx)) + K[np.ix_(idx, idx)] / len(idx) for idx in shards]

    def local_inverse(j: int, u: np.ndarray) -> np.ndarray:
        idx = shards[j]
        h = np.linalg.solve(systems[j], K[idx, :] @ u)
        out = u / lam
        out[idx] -= h / (lam * len(idx))
        return out

    c = np.zeros(N)
    for j, idx in enumerate(shards):
        u = np.zeros(N)
        u[idx] = y[idx] / len(idx)
        c += w[j] * local_inverse(j, u)
    coefs = [c]
    for _ in range(rounds):
        grad = (K @ c - y) / N + lam * c
        c = c - sum(w[j] * local_inverse(j, grad) for j in range(len(shards)))
        coefs.append(c)
    return OracleResult(data.inputs, np.vstack(coefs), kernel)


def comm_totals(log: CommLog, m: int, N: int, L: int) -> dict:
    """Per-round and cumulative float counts, checked against the closed forms.

    Per round: step 4 ``mN``, step 5 ``mN``, step 6 ``mN``, step 7 ``N``;
    setup step 2 ``mN`` once.
    """
    expected = {4: m * N, 5: m * N, 6: m * N, 7: N}
    setup = log.step_total(0, 2)
    if setup != m * N:
        raise InvalidStateError(f"step 2 moved {setup} floats, expected {m * N}")
    per_round = []
    for ell in range(1, L + 1):
        for step, count in expected.items():
            got = log.step_total(ell, step)
            if got != count:
                raise InvalidStateError(f"round {ell} step {step}: {got} floats, expected {count}")
        total = log.round_total(ell)
        if total != 3 * m * N + N:
            raise InvalidStateError(f"round {ell} moved {total} floats, expected {3 * m * N + N}")
        per_round.append(total)
    return {
        "setup": setup,
        "per_round": per_round,
        "cumulative": setup + sum(per_round),
        "broadcast": log.broadcast_total(),
    }


def krr_fitted_blocks(data: Dataset, partition: Partition, kernel: KernelSpec, lam: float) -> np.ndarray:
    """Full-data KRR fitted values, block-ordered like the DKRR iterates."""
    K = gram(kernel, data.inputs)
    alpha = shifted_gram_factor(K, lam).solve(data.outputs)
    return (K @ alpha)[np.concatenate(partition.shards)]


def iterate_distances(model: DkrrModel, reference: np.ndarray) -> np.ndarray:
    """Euclidean distance of every stored iterate to a block-ordered ``reference``."""
    return np.array([np.linalg.norm(f - reference) for f in model.iterates])
