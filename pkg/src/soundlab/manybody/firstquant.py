"""Labelled-particle (tensor product) representation for small N and M.

Needed wherever operators act on particle 1 or on particles 1 and 2 alone,
which the occupation-number basis cannot express.  Every operator here is a
dense ``M^N x M^N`` matrix, so sizes are guarded at ``M^N <= 256``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from math import factorial, sqrt

import numpy as np

from .counting import CountingWeight
from .fock import FockBasis

__all__ = ["MAX_TENSOR_DIMENSION", "TensorSpace", "LemmaCheck", "lemma1_suite"]

MAX_TENSOR_DIMENSION = 256


class TensorSpace:
    """``(C^M)^{tensor N}`` with particle 1 the most significant index."""

    def __init__(self, modes: int, particles: int):
        if modes**particles > MAX_TENSOR_DIMENSION:
            raise ValueError(f"M^N = {modes**particles} exceeds the guard {MAX_TENSOR_DIMENSION}")
        self.modes = modes
        self.particles = particles
        self.dimension = modes**particles

    def on_particle(self, op: np.ndarray, j: int) -> np.ndarray:
        """Embed a one-particle operator acting on particle ``j`` (0-based)."""
        eye = np.eye(self.modes)
        out = np.eye(1)
        for i in range(self.particles):
            out = np.kron(out, op if i == j else eye)
        return out

    def on_pair(self, op2: np.ndarray) -> np.ndarray:
        """Embed an ``M^2 x M^2`` operator acting on particles 1 and 2."""
        return np.kron(op2, np.eye(self.modes ** (self.particles - 2)))

    def multiplication_1(self, Y: np.ndarray) -> np.ndarray:
        return self.on_particle(np.diag(Y), 0)

    def multiplication_12(self, Z: np.ndarray) -> np.ndarray:
        return self.on_pair(np.diag(np.asarray(Z).ravel()))

    def sum_one_body(self, op: np.ndarray) -> np.ndarray:
        return sum(self.on_particle(op, j) for j in range(self.particles))

    def pair_multiplication(self, V: np.ndarray) -> np.ndarray:
        """Diagonal of ``sum_{j<k} V(x_j, x_k)`` for an ``M x M`` table."""
        idx = np.array(list(np.ndindex(*(self.modes,) * self.particles)))
        diag = np.zeros(self.dimension)
        for j, k in combinations(range(self.particles), 2):
            diag += V[idx[:, j], idx[:, k]]
        return np.diag(diag)

    def symmetrize(self, psi: np.ndarray) -> np.ndarray:
        t = np.asarray(psi).reshape((self.modes,) * self.particles)
        out = sum(np.transpose(t, perm) for perm in permutations(range(self.particles)))
        return (out / factorial(self.particles)).ravel()

    def random_symmetric(self, rng: np.random.Generator) -> np.ndarray:
        psi = rng.normal(size=self.dimension) + 1j * rng.normal(size=self.dimension)
        psi = self.symmetrize(psi)
        return psi / np.linalg.norm(psi)

    def embedding(self, basis: FockBasis) -> np.ndarray:
        """Columns are the normalised symmetric tensors of each occupation state."""
        if basis.modes != self.modes or basis.particles != self.particles:
            raise ValueError("Fock basis does not match the tensor space")
        E = np.zeros((self.dimension, len(basis)))
        labels = np.array(list(np.ndindex(*(self.modes,) * self.particles)))
        occ = np.stack([np.bincount(row, minlength=self.modes) for row in labels])
        for col, n in enumerate(basis.states):
            hits = np.all(occ == n, axis=1)
            E[hits, col] = 1.0 / sqrt(hits.sum())
        return E

    def counting_projectors(self, p: np.ndarray) -> list[np.ndarray]:
        """``P_k = sum over k-subsets S of prod_{j in S} q_j prod_{j not in S} p_j``."""
        q = np.eye(self.modes) - p
        ps = [self.on_particle(p, j) for j in range(self.particles)]
        qs = [self.on_particle(q, j) for j in range(self.particles)]
        out = []
        for k in range(self.particles + 1):
            Pk = np.zeros((self.dimension,) * 2, dtype=complex)
            for S in combinations(range(self.particles), k):
                term = np.eye(self.dimension, dtype=complex)
                for j in range(self.particles):
                    term = term @ (qs[j] if j in S else ps[j])
                Pk += term
            out.append(Pk)
        return out


def _hat(Pks: list[np.ndarray], w: CountingWeight) -> np.ndarray:
    return sum(w.at(k) * Pk for k, Pk in enumerate(Pks))


@dataclass
class LemmaCheck:
    name: str
    kind: str  # "equality" or "inequality"
    worst: float = 0.0
    trials: int = 0
    failures: int = 0

    @property
    def passed(self) -> bool:
        return self.trials > 0 and self.failures == 0

    def record(self, value: float, ok: bool) -> None:
        self.trials += 1
        self.worst = max(self.worst, value)
        self.failures += not ok


@dataclass
class LemmaReport:
    particles: int
    modes: int
    checks: dict[str, LemmaCheck] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def lines(self) -> list[str]:
        return [
            f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.kind}, worst={c.worst:.3e}, trials={c.trials}"
            for c in self.checks.values()
        ]


def _random_orbital(rng, M):
    return rng.normal(size=M) + 1j * rng.normal(size=M)


def _random_weight(rng, N):
    return CountingWeight(tuple(rng.uniform(0.0, 2.0, size=N + 1)))


def lemma1_suite(N: int, M: int, trials: int = 50, seed: int = 0, tol: float = 1e-10) -> LemmaReport:
    """Check the counting-operator identities on random data.

    Each trial draws a fresh orbital, weights ``w, v``, symmetric state and
    multiplication functions ``Y(x1)``, ``Z(x1, x2)``.  Equalities are
    checked in the 2-norm of the applied difference, relative to the size of
    the terms; the inequality with slack ``tol``.
    """
    if N > 4 or M > 4:
        raise ValueError("lemma suite is limited to N <= 4 and M <= 4")
    if N < 2:
        raise ValueError("lemma suite needs at least two particles")
    space = TensorSpace(M, N)
    rng = np.random.default_rng(seed)
    names = [
        ("hat-multiplication", "equality"),
        ("hat-pq-commutation", "equality"),
        ("counting-Pk-commutation", "equality"),
        ("old-q1", "equality"),
        ("old-q1-2", "equality"),
        ("old-q1-3", "inequality"),
        ("pull-through-one-body", "equality"),
        ("pull-through-two-body", "equality"),
    ]
    report = LemmaReport(N, M, {n: LemmaCheck(n, kind) for n, kind in names})
    chk = report.checks
    nw = CountingWeight(tuple(np.sqrt(k / N) for k in range(N + 1)))

    for _ in range(trials):
        phi = _random_orbital(rng, M)
        p = np.outer(phi, phi.conj()) / np.vdot(phi, phi).real
        q = np.eye(M) - p
        Pks = space.counting_projectors(p)
        w, v = _random_weight(rng, N), _random_weight(rng, N)
        W, Vh = _hat(Pks, w), _hat(Pks, v)
        psi = space.random_symmetric(rng)

        vw = _hat(Pks, v * w) @ psi
        err = max(np.linalg.norm(Vh @ W @ psi - vw), np.linalg.norm(W @ Vh @ psi - vw)) / max(1.0, np.linalg.norm(vw))
        chk["hat-multiplication"].record(float(err), err <= tol)

        errs = []
        for j in range(N):
            pj, qj = space.on_particle(p, j), space.on_particle(q, j)
            errs.append(np.linalg.norm((W @ pj - pj @ W) @ psi))
            errs.append(np.linalg.norm((W @ qj - qj @ W) @ psi))
        err = float(max(errs)) / max(1.0, np.linalg.norm(W))
        chk["hat-pq-commutation"].record(err, err <= tol)

        err = max(float(np.linalg.norm((W @ Pk - Pk @ W) @ psi)) for Pk in Pks) / max(1.0, np.linalg.norm(W))
        chk["counting-Pk-commutation"].record(err, err <= tol)

        N2 = _hat(Pks, nw) @ _hat(Pks, nw)
        qsum = sum(space.on_particle(q, j) for j in range(N)) / N
        err = float(np.max(np.abs(N2 - qsum)))
        chk["old-q1"].record(err, err <= tol)

        q1, q2 = space.on_particle(q, 0), space.on_particle(q, 1)
        nh = _hat(Pks, nw)
        a, b = np.linalg.norm(W @ q1 @ psi), np.linalg.norm(W @ nh @ psi)
        err = abs(a - b) / max(1.0, a, b)
        chk["old-q1-2"].record(err, err <= tol)

        lhs = np.linalg.norm(W @ q1 @ q2 @ psi)
        rhs = sqrt(N / (N - 1)) * np.linalg.norm(W @ nh @ nh @ psi)
        chk["old-q1-3"].record(max(0.0, lhs - rhs), lhs <= rhs + tol)

        Y = rng.normal(size=M) + 1j * rng.normal(size=M)
        Ym = space.multiplication_1(Y)
        A = [space.on_particle(p, 0), q1]
        errs = []
        for j in range(2):
            for l in range(2):
                S = A[j] @ Ym @ A[l]
                lhs_v = W @ S @ psi
                rhs_v = S @ _hat(Pks, w.shifted(j - l)) @ psi
                errs.append(np.linalg.norm(lhs_v - rhs_v) / max(1.0, np.linalg.norm(lhs_v)))
        err = float(max(errs))
        chk["pull-through-one-body"].record(err, err <= tol)

        Z = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
        Zm = space.multiplication_12(Z)
        p1, p2 = A[0], space.on_particle(p, 1)
        B = [p1 @ p2, p1 @ q2, q1 @ q2]
        errs = []
        for j in range(3):
            for l in range(3):
                S = B[j] @ Zm @ B[l]
                lhs_v = W @ S @ psi
                rhs_v = S @ _hat(Pks, w.shifted(j - l)) @ psi
                errs.append(np.linalg.norm(lhs_v - rhs_v) / max(1.0, np.linalg.norm(lhs_v)))
        err = float(max(errs))
        chk["pull-through-two-body"].record(err, err <= tol)

    return report
