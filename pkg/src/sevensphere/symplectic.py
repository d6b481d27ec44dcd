"""2x2 quaternionic matrices with orthonormal columns and the two circle-group
actions on them: the column-scaling action whose orbits project to the round
7-sphere, and the conjugating action that produces the twisted quotient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quaternions import ONE, Quaternion, random_unit_quaternion

MEMBERSHIP_TOL = 1e-10
UNIT_TOL = 1e-9


class SpMatrix:
    """Matrix [[a, b], [c, d]] with quaternion entries."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a: Quaternion, b: Quaternion, c: Quaternion, d: Quaternion):
        self.a = a
        self.b = b
        self.c = c
        self.d = d

    @classmethod
    def identity(cls) -> "SpMatrix":
        return cls(ONE, Quaternion(), Quaternion(), ONE)

    def entries(self):
        return self.a, self.b, self.c, self.d

    def isclose(self, other, tol=1e-12) -> bool:
        return all(p.isclose(q, tol) for p, q in zip(self.entries(), other.entries()))

    def __repr__(self):
        return f"SpMatrix(a={self.a}, b={self.b}, c={self.c}, d={self.d})"


@dataclass
class MembershipCheck:
    ok: bool
    column_residual: float
    orthogonality_residual: float


def membership_check(Q: SpMatrix, tol: float = MEMBERSHIP_TOL) -> MembershipCheck:
    """Test the two defining conditions: unit columns and conj(b)a + conj(d)c = 0.

    Never raises; reports residual magnitudes alongside the verdict.
    """
    col1 = Q.a.norm_sq() + Q.c.norm_sq()
    col2 = Q.b.norm_sq() + Q.d.norm_sq()
    col_res = max(abs(col1 - 1.0), abs(col2 - 1.0))
    orth = Q.b.conj() * Q.a + Q.d.conj() * Q.c
    orth_res = orth.norm()
    return MembershipCheck(col_res <= tol and orth_res <= tol, col_res, orth_res)


def is_member(Q: SpMatrix, tol: float = MEMBERSHIP_TOL) -> bool:
    return membership_check(Q, tol).ok


def _require_unit(q: Quaternion):
    if abs(q.norm() - 1.0) > UNIT_TOL:
        raise ValueError(f"action requires a unit quaternion, got |q| = {q.norm()!r}")


def bullet_action(q: Quaternion, Q: SpMatrix) -> SpMatrix:
    """Right-multiply the second column by conj(q); the first column is untouched."""
    _require_unit(q)
    qc = q.conj()
    return SpMatrix(Q.a, Q.b * qc, Q.c, Q.d * qc)


def star_action(q: Quaternion, Q: SpMatrix) -> SpMatrix:
    """Conjugate the first column by q and left-multiply the second column by q."""
    _require_unit(q)
    qc = q.conj()
    return SpMatrix(q * Q.a * qc, q * Q.b, q * Q.c * qc, q * Q.d)


def quaternion_pair_to_point(p: Quaternion, q: Quaternion) -> np.ndarray:
    """Interleave two quaternions into an 8-vector: (p0, q0, p1, q1, p2, q2, p3, q3)."""
    return np.array([p.w, q.w, p.x, q.x, p.y, q.y, p.z, q.z])


def point_to_quaternion_pair(z) -> tuple[Quaternion, Quaternion]:
    z = np.asarray(z, dtype=float)
    return (Quaternion(z[0], z[2], z[4], z[6]),
            Quaternion(z[1], z[3], z[5], z[7]))


def project_bullet(Q: SpMatrix, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    """Map a member matrix to the 8-vector built from its first column (a, c)."""
    check = membership_check(Q, tol)
    if not check.ok:
        raise ValueError(
            "projection requires a member matrix; residuals "
            f"(columns {check.column_residual:.3e}, "
            f"orthogonality {check.orthogonality_residual:.3e})"
        )
    return quaternion_pair_to_point(Q.a, Q.c)


@dataclass
class RealFormMatrix:
    """Matrix [[alpha, beta], [-beta, alpha]] with real alpha, beta, alpha^2 + beta^2 = 1."""

    alpha: float
    beta: float

    def __post_init__(self):
        r = self.alpha ** 2 + self.beta ** 2
        if abs(r - 1.0) > 1e-9:
            raise ValueError(f"alpha^2 + beta^2 = {r!r}, expected 1")

    def as_sp_matrix(self) -> SpMatrix:
        return SpMatrix(Quaternion(self.alpha), Quaternion(self.beta),
                        Quaternion(-self.beta), Quaternion(self.alpha))


def fiber_coincidence_check(R: RealFormMatrix, q: Quaternion,
                            tol: float = 1e-12) -> Quaternion:
    """Return q' with q' star R = q bullet R entrywise.

    For real-form matrices the two orbits coincide and q' is conj(q); the
    equality is asserted entrywise, a mismatch means an implementation bug.
    """
    _require_unit(q)
    Q = R.as_sp_matrix()
    qprime = q.conj()
    left = bullet_action(q, Q)
    right = star_action(qprime, Q)
    for p, r in zip(left.entries(), right.entries()):
        if not p.isclose(r, tol):
            raise RuntimeError(
                "orbit coincidence failed on a real-form matrix: "
                f"{p} vs {r} (this indicates a bug in the actions)"
            )
    return qprime


def random_sp_matrix(rng: np.random.Generator) -> SpMatrix:
    """Draw a random member matrix.

    First column uniform on the unit 8-sphere of pairs, second column obtained
    from a random draw by one quaternionic Gram-Schmidt sweep against the first.
    """
    while True:
        v = rng.standard_normal(8)
        v /= np.linalg.norm(v)
        a = Quaternion(*v[:4])
        c = Quaternion(*v[4:])
        w = rng.standard_normal(8)
        b0 = Quaternion(*w[:4])
        d0 = Quaternion(*w[4:])
        # t = conj(b0) a + conj(d0) c; subtracting (a, c) * conj(t) zeroes it out
        t = b0.conj() * a + d0.conj() * c
        b = b0 - a * t.conj()
        d = d0 - c * t.conj()
        n = np.sqrt(b.norm_sq() + d.norm_sq())
        if n > 1e-6:
            return SpMatrix(a, b * (1.0 / n), c, d * (1.0 / n))


def random_real_form(rng: np.random.Generator) -> RealFormMatrix:
    theta = rng.uniform(0.0, 2.0 * np.pi)
    return RealFormMatrix(float(np.cos(theta)), float(np.sin(theta)))


__all__ = [
    "SpMatrix", "MembershipCheck", "RealFormMatrix",
    "membership_check", "is_member", "bullet_action", "star_action",
    "project_bullet", "fiber_coincidence_check",
    "quaternion_pair_to_point", "point_to_quaternion_pair",
    "random_sp_matrix", "random_real_form",
    "random_unit_quaternion",
]
