"""The sphere-to-model-surface homeomorphism h, built from a configurable
ambient deformation D and a positive scaling function beta:

    h(z)      = D^{-1}(beta(z) z)
    h^{-1}(g) = D(g) / |D(g)|

The default deformation family scales each ray by a smooth bump of the
direction that vanishes on a neighbourhood of the circle in the (z1, z2)
plane, so that circle is fixed pointwise and h has a closed-form inverse.
A kinked (merely continuous) scaling profile is provided to exercise the
regularity failure of the field pushforward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import EntropyReport, GridSpec
from .frames import DIM, plane_generator
from .geometry import to_cartesian, to_spherical, volume_element


class RegularityError(ValueError):
    """Raised when an operation needs more smoothness than the map offers."""


def _smooth_transition(t):
    """C-infinity ramp: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    lo = np.zeros_like(t)
    hi = np.ones_like(t)
    mid = (t > 0.0) & (t < 1.0)
    tm = np.clip(t, 1e-12, 1.0 - 1e-12)
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / (1.0 - tm))
    return np.where(t <= 0.0, lo, np.where(t >= 1.0, hi, np.where(mid, a / (a + b), hi)))


def _smooth_transition_deriv(t, h=1e-6):
    return (_smooth_transition(t + h) - _smooth_transition(t - h)) / (2.0 * h)


def _kink_transition(t):
    return np.clip(t, 0.0, 1.0)


def _plane_distance(u):
    """sqrt(u3^2 + ... + u8^2): distance-like coordinate off the (z1,z2) circle."""
    u = np.asarray(u, dtype=float)
    return np.sqrt(np.sum(u[..., 2:] ** 2, axis=-1))


class BumpProfile:
    """Scalar profile of the direction, zero near the fixed circle."""

    def __init__(self, rho0=0.15, rho1=0.6, kind="smooth"):
        if kind not in ("smooth", "kink"):
            raise ValueError(f"unknown profile kind {kind!r}")
        self.rho0 = rho0
        self.rho1 = rho1
        self.kind = kind

    def value(self, u):
        t = (_plane_distance(u) - self.rho0) / (self.rho1 - self.rho0)
        if self.kind == "smooth":
            return _smooth_transition(t)
        return _kink_transition(t)

    def gradient(self, u):
        """Ambient gradient at unit u; only available for the smooth profile."""
        if self.kind != "smooth":
            raise RegularityError("the kinked profile is not differentiable")
        u = np.asarray(u, dtype=float)
        rho = _plane_distance(u)
        t = (rho - self.rho0) / (self.rho1 - self.rho0)
        dpsi = _smooth_transition_deriv(t) / (self.rho1 - self.rho0)
        grad = np.zeros(DIM)
        if rho > 1e-12:
            grad[2:] = dpsi * u[2:] / rho
        # chain through the normalization u = x/|x| at |x| = 1
        proj = np.eye(DIM) - np.outer(u, u)
        return proj @ grad


class Deformation:
    """Direction-dependent radial scaling D(x) = x * (1 + eps * s(x/|x|))."""

    def __init__(self, eps: float = 0.2, profile: BumpProfile | None = None):
        if not 0.0 <= eps < 0.3:
            raise ValueError("deformation strength must lie in [0, 0.3)")
        self.eps = eps
        self.profile = profile or BumpProfile()

    def scale(self, direction):
        return 1.0 + self.eps * self.profile.value(direction)

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        if np.any(r < 1e-300):
            raise ValueError("deformation is undefined at the origin")
        u = x / r
        s = np.asarray(self.scale(u))
        return x * s[..., None] if s.ndim else x * s

    def inverse(self, y) -> np.ndarray:
        # the scaling depends only on the direction, which forward preserves
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y, axis=-1, keepdims=True)
        if np.any(r < 1e-300):
            raise ValueError("deformation inverse is undefined at the origin")
        u = y / r
        s = np.asarray(self.scale(u))
        return y / (s[..., None] if s.ndim else s)

    def jacobian(self, x) -> np.ndarray:
        """Analytic d D / d x at a single point."""
        x = np.asarray(x, dtype=float)
        r = float(np.linalg.norm(x))
        u = x / r
        g = float(self.scale(u))
        grad_s = self.profile.gradient(u) / r  # gradient of s(x/|x|) in x
        return g * np.eye(DIM) + self.eps * np.outer(x, grad_s)

    def inverse_jacobian(self, y) -> np.ndarray:
        """Analytic d D^{-1} / d y at a single point."""
        y = np.asarray(y, dtype=float)
        r = float(np.linalg.norm(y))
        u = y / r
        g = float(self.scale(u))
        grad_s = self.profile.gradient(u) / r
        # D^{-1}(y) = y / g(y/|y|)
        return np.eye(DIM) / g - self.eps * np.outer(y, grad_s) / g ** 2


def identity_deformation() -> Deformation:
    return Deformation(eps=0.0)


class ScalingFunction:
    """Positive function on the sphere; the radius assigned to each direction."""

    def __init__(self, base: float = 1.0, eps: float = 0.0,
                 profile: BumpProfile | None = None):
        self.base = base
        self.eps = eps
        self.profile = profile or BumpProfile()

    @property
    def smoothness(self) -> str:
        if self.eps == 0.0 or self.profile.kind == "smooth":
            return "smooth"
        return "c0"

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        val = self.base + self.eps * self.profile.value(z)
        if np.any(np.asarray(val) <= 0.0):
            raise ValueError("scaling function must stay positive")
        return val

    def gradient(self, z) -> np.ndarray:
        if self.smoothness != "smooth":
            raise RegularityError("scaling function is not C1")
        if self.eps == 0.0:
            return np.zeros(DIM)
        return self.eps * self.profile.gradient(np.asarray(z, dtype=float))


def constant_scaling(value: float = 1.0) -> ScalingFunction:
    return ScalingFunction(base=value)


class ExoticMap:
    """The homeomorphism h(z) = D^{-1}(beta(z) z) and its inverse."""

    def __init__(self, deformation: Deformation | None = None,
                 scaling: ScalingFunction | None = None):
        self.deformation = deformation or identity_deformation()
        self.scaling = scaling or constant_scaling()

    @classmethod
    def bump(cls, eps: float = 0.2, **profile_kwargs) -> "ExoticMap":
        return cls(Deformation(eps, BumpProfile(**profile_kwargs)))

    @property
    def is_identity(self) -> bool:
        return self.deformation.eps == 0.0 and self.scaling.base == 1.0 \
            and self.scaling.eps == 0.0

    def forward(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        beta = np.asarray(self.scaling(z))
        zeta = z * (beta[..., None] if beta.ndim else beta)
        return self.deformation.inverse(zeta)

    def inverse(self, gamma) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=float)
        d = self.deformation.forward(gamma)
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        if np.any(n < 1e-300):
            raise ValueError("deformation maps a surface point to the origin")
        return d / n

    def jacobian(self, z) -> np.ndarray:
        """d h / d z at one sphere point: (dD^{-1})(zeta) (z grad(beta)^T + beta I)."""
        z = np.asarray(z, dtype=float)
        beta = float(self.scaling(z))
        grad_beta = self.scaling.gradient(z)
        dinv = self.deformation.inverse_jacobian(beta * z)
        return dinv @ (np.outer(z, grad_beta) + beta * np.eye(DIM))

    def surface_point(self, direction) -> np.ndarray:
        """The model-surface point on a given ray (directions parameterize it)."""
        direction = np.asarray(direction, dtype=float)
        direction = direction / np.linalg.norm(direction, axis=-1, keepdims=True)
        return self.forward(direction)

    def surface_project(self, y) -> np.ndarray:
        """Retract an ambient point onto the surface along its ray."""
        return self.surface_point(y)


def pushforward_field(V, h: ExoticMap):
    """The induced field (h_* V)(gamma) = dh(h^{-1}(gamma)) V(h^{-1}(gamma)).

    Requires the scaling function to be C1; with the kinked profile the
    chain-rule factor does not exist and the construction is refused.
    """
    if h.scaling.smoothness != "smooth":
        raise RegularityError(
            "pushforward needs a C1 scaling function; the kinked profile is "
            "only continuous, so the induced field may not exist")

    def field(gamma):
        gamma = np.asarray(gamma, dtype=float)
        if gamma.ndim == 1:
            z = h.inverse(gamma)
            return h.jacobian(z) @ np.asarray(V(z), dtype=float)
        return np.stack([field(g) for g in gamma])

    field.label = "pushforward"
    return field


class ConjugatedFlow:
    """h compose g compose h^{-1}: the flow transported to the model surface."""

    def __init__(self, flow, h: ExoticMap):
        self.flow = flow
        self.h = h
        self.s = flow.s
        self.t = flow.t

    def apply(self, gamma):
        return self.h.forward(self.flow.apply(self.h.inverse(gamma)))

    def compose(self, later: "ConjugatedFlow") -> "ConjugatedFlow":
        if later.h is not self.h:
            raise ValueError("cannot chain flows conjugated by different maps")
        return ConjugatedFlow(self.flow.compose(later.flow), self.h)

    def invert(self) -> "ConjugatedFlow":
        return ConjugatedFlow(self.flow.invert(), self.h)


def pushforward_flow(flow, h: ExoticMap) -> ConjugatedFlow:
    return ConjugatedFlow(flow, h)


def pullback_metric(gamma, h: ExoticMap) -> np.ndarray:
    """G' = J^T J with J the ambient Jacobian of h^{-1} at gamma.

    J annihilates the ray direction, so G' is the pulled-back round metric on
    the surface tangent plane and zero radially.
    """
    gamma = np.asarray(gamma, dtype=float)
    d = h.deformation.forward(gamma)
    nd = float(np.linalg.norm(d))
    if nd < 1e-300:
        raise ValueError("deformation maps the point to the origin")
    jac_d = h.deformation.jacobian(gamma)
    # d/dgamma of D/|D| = (I - u u^T)/|D| . dD with u = D/|D|
    u = d / nd
    jac = (np.eye(DIM) - np.outer(u, u)) @ jac_d / nd
    return jac.T @ jac


def surface_patch_jacobian(h: ExoticMap, phi, step: float = 1e-6) -> np.ndarray:
    """8x7 derivative of the surface parameterization angles -> h(chart(angles))."""
    phi = np.asarray(phi, dtype=float)
    out = np.empty((DIM, 7))
    for k in range(7):
        pp = phi.copy()
        pp[k] += step
        pm = phi.copy()
        pm[k] -= step
        out[:, k] = (h.forward(to_cartesian(pp)) - h.forward(to_cartesian(pm))) \
            / (2.0 * step)
    return out


def entropy_on_surface(gammas, h: ExoticMap, grid: GridSpec,
                       t: float | None = None) -> EntropyReport:
    """Entropy of a transported sample cloud using the pulled-back measure.

    Bins by the ray direction (the surface chart).  Each bin volume is the
    integral over the angle box of the pullback volume density
    sqrt(det M^T G' M), M being the surface patch derivative; the integral is
    evaluated against the chart's reference density, i.e. as the exact
    reference box integral times the density ratio at the box center.  A wrong
    pullback metric therefore shifts the volumes and the entropy.
    """
    gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
    dirs = gammas / np.linalg.norm(gammas, axis=-1, keepdims=True)
    phi = to_spherical(dirs)
    idx = grid.bin_indices(phi)
    keys, counts = np.unique(idx, axis=0, return_counts=True)
    widths = np.array([np.pi] * 6 + [2.0 * np.pi]) / np.asarray(grid.bins, dtype=float)
    axis_weights = [grid.axis_weights(a) for a in range(7)]
    volumes = np.empty(len(keys))
    for row, key in enumerate(keys):
        center = (np.asarray(key, dtype=float) + 0.5) * widths
        m = surface_patch_jacobian(h, center)
        gp = pullback_metric(h.forward(to_cartesian(center)), h)
        gram = m.T @ gp @ m
        ratio = np.sqrt(max(np.linalg.det(gram), 0.0)) / volume_element(center)
        box = 1.0
        for a in range(7):
            box *= axis_weights[a][key[a]]
        volumes[row] = box * ratio
    n = gammas.shape[0]
    dens = counts / (n * volumes)
    w = counts / n
    logp = np.log(dens)
    s = float(-np.sum(w * logp))
    var = float(np.sum(w * logp ** 2) - s ** 2)
    return EntropyReport(S=s, stderr=float(np.sqrt(max(var, 0.0) / n)),
                         mm_correction=(len(keys) - 1) / (2.0 * n),
                         n_occupied=len(keys), t=t)


@dataclass
class CircleImage:
    i: int
    j: int
    params: np.ndarray
    points: np.ndarray          # (n, 8) image of the circle under h
    closure_error: float
    max_radial_deviation: float


def circle_images(h: ExoticMap, n_points: int = 257) -> list:
    """Images under h of the 28 coordinate-plane circles.

    Circle (i, j) is the integral curve of the plane rotation generator in
    those coordinates; each image is sampled over a full period and its
    closure defect and radial deviation from 1 are reported.
    """
    out = []
    thetas = np.linspace(0.0, 2.0 * np.pi, n_points)
    for i in range(1, DIM + 1):
        for j in range(i + 1, DIM + 1):
            circle = np.zeros((n_points, DIM))
            circle[:, i - 1] = np.cos(thetas)
            circle[:, j - 1] = np.sin(thetas)
            image = h.forward(circle)
            closure = float(np.linalg.norm(image[0] - image[-1]))
            radii = np.linalg.norm(image, axis=-1)
            out.append(CircleImage(i, j, thetas, image, closure,
                                   float(np.max(np.abs(radii - 1.0)))))
    return out


def write_circles_csv(images, fname) -> None:
    with open(fname, "w") as fh:
        fh.write("i,j,theta," + ",".join(f"g{k}" for k in range(1, DIM + 1)) + "\n")
        for im in images:
            for theta, pt in zip(im.params, im.points):
                fh.write(f"{im.i},{im.j},{'%.17g' % theta},"
                         + ",".join("%.17g" % v for v in pt) + "\n")


def plane_circle_generator(i: int, j: int) -> np.ndarray:
    """Generator whose integral curves are the coordinate circles; re-exported
    for callers that iterate the 28 planes."""
    return plane_generator(i, j)


__all__ = [
    "RegularityError", "BumpProfile", "Deformation", "ScalingFunction",
    "ExoticMap", "ConjugatedFlow", "CircleImage",
    "identity_deformation", "constant_scaling",
    "pushforward_field", "pushforward_flow", "pullback_metric",
    "surface_patch_jacobian", "entropy_on_surface",
    "circle_images", "write_circles_csv", "plane_circle_generator",
]
