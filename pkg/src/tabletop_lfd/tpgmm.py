"""Task-parameterized Gaussian mixture over cleaning trajectories.

Data points are (t, x, y): normalized time plus tabletop position in meters.
Each demonstration carries P=3 reference frames anchored at the start, middle
and end of its motion; a frame stores component statistics in local
coordinates and maps them back through the lifted transform
``A~ = diag(1, A)``, ``b~ = (0, b)`` so time is never rotated or shifted.

Fitting runs expectation-maximization on the per-frame product likelihood;
reproduction fuses the per-frame Gaussians by precision weighting and
conditions the fused mixture on time (Gaussian mixture regression).
"""

from dataclasses import dataclass, field
import json
import os

import numpy as np

from .errors import (CollapsedComponent, DegenerateFrameGeometry, InsufficientData,
                     InvariantViolation, MissingFile, NonSpdCovariance,
                     SchemaVersionMismatch, SingularPrecisionSum, UntrainedModel)

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ReferenceFrame:
    """Task frame: origin ``b`` (meters) and rotation ``a`` (2x2, det +1)."""

    b: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(2)
        a = np.asarray(self.a, dtype=float).reshape(2, 2)
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(a))):
            raise InvariantViolation("frame has non-finite entries")
        if np.max(np.abs(a.T @ a - np.eye(2))) > 1e-9:
            raise InvariantViolation("frame orientation is not orthonormal")
        if abs(np.linalg.det(a) - 1.0) > 1e-9:
            raise InvariantViolation("frame orientation must be a proper rotation")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)

    @property
    def a_lifted(self) -> np.ndarray:
        out = np.eye(3)
        out[1:, 1:] = self.a
        return out

    @property
    def b_lifted(self) -> np.ndarray:
        return np.array([0.0, self.b[0], self.b[1]])


def frame_orientations(b1, b2, b3):
    """Rotation matrices for the three task frames.

    Frame 1 is aligned with the initial-to-intermediate displacement, frames
    2 and 3 with the intermediate-to-final displacement: sin/cos of the frame
    angle come directly from the displacement components over its norm.
    """
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    b3 = np.asarray(b3, dtype=float)

    def rot(d, which):
        r = np.linalg.norm(d)
        if r < 1e-12:
            raise DegenerateFrameGeometry(f"{which} anchor points coincide")
        c, s = d[0] / r, d[1] / r
        return np.array([[c, -s], [s, c]])

    a1 = rot(b2 - b1, "initial/intermediate")
    a23 = rot(b3 - b2, "intermediate/final")
    return a1, a23, a23.copy()


def make_frames(b1, b2, b3):
    """The three demonstration frames anchored at b1, b2, b3."""
    a1, a2, a3 = frame_orientations(b1, b2, b3)
    return (ReferenceFrame(b1, a1), ReferenceFrame(b2, a2), ReferenceFrame(b3, a3))


@dataclass(frozen=True)
class Gaussian:
    """Mean/covariance pair; the covariance must be symmetric positive definite."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=float)
        _require_spd(sigma, mu.shape[0])
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def _require_spd(sigma, dim):
    if sigma.shape != (dim, dim) or not np.all(np.isfinite(sigma)):
        raise NonSpdCovariance(f"expected finite ({dim}, {dim}) covariance")
    if np.max(np.abs(sigma - sigma.T)) > 1e-9 * max(1.0, np.max(np.abs(sigma))):
        raise NonSpdCovariance("covariance is not symmetric")
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as e:
        raise NonSpdCovariance("covariance is not positive definite") from e


def project_gaussian(frame: ReferenceFrame, z_mu, z_sigma) -> Gaussian:
    """Map local component statistics into the world through one frame."""
    z_mu = np.asarray(z_mu, dtype=float).reshape(3)
    z_sigma = np.asarray(z_sigma, dtype=float)
    _require_spd(z_sigma, 3)
    a = frame.a_lifted
    return Gaussian(a @ z_mu + frame.b_lifted, a @ z_sigma @ a.T)


def fuse_gaussians(gaussians) -> Gaussian:
    """Precision-weighted product of Gaussians (any shared dimension)."""
    gaussians = list(gaussians)
    if not gaussians:
        raise InvariantViolation("nothing to fuse")
    dim = gaussians[0].mu.shape[0]
    lam_sum = np.zeros((dim, dim))
    eta_sum = np.zeros(dim)
    for g in gaussians:
        try:
            lam = np.linalg.inv(g.sigma)
        except np.linalg.LinAlgError as e:
            raise NonSpdCovariance("component covariance is singular") from e
        lam_sum += lam
        eta_sum += lam @ g.mu
    try:
        sigma = np.linalg.inv(lam_sum)
    except np.linalg.LinAlgError as e:
        raise SingularPrecisionSum(str(e)) from e
    if not np.all(np.isfinite(sigma)):
        raise SingularPrecisionSum("precision sum is numerically singular")
    sigma = 0.5 * (sigma + sigma.T)
    return Gaussian(sigma @ eta_sum, sigma)


def product_of_frame_gaussians(frames, model: "TpGmmModel", i: int) -> Gaussian:
    """Fused world-frame Gaussian of component ``i`` under the given frames."""
    _require_trained(model)
    if len(frames) != model.p:
        raise InvariantViolation(f"model expects {model.p} frames, got {len(frames)}")
    return fuse_gaussians(project_gaussian(f, model.z_mu[i, j], model.z_sigma[i, j])
                          for j, f in enumerate(frames))


@dataclass
class Trajectory:
    """Time-stamped 2D path: rows (t, x, y), t strictly increasing 0 to 1."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
            raise InvariantViolation(f"expected (n, 3) samples, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvariantViolation("trajectory has non-finite samples")
        t = pts[:, 0]
        if abs(t[0]) > 1e-12 or abs(t[-1] - 1.0) > 1e-12 or np.any(np.diff(t) <= 0):
            raise InvariantViolation("time must increase strictly from 0 to 1")
        self.points = pts

    @property
    def t(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, 1:]

    def __len__(self) -> int:
        return len(self.points)


TRAJECTORY_LEN = 200


@dataclass
class TpGmmModel:
    """Fitted mixture: weights ``pi`` plus per-frame local statistics.

    ``z_mu[i, j]`` and ``z_sigma[i, j]`` hold component ``i`` seen from frame
    ``j``.  ``ll_history`` records the fitting objective (per-frame product
    log-likelihood) at the start of every EM iteration.
    """

    pi: np.ndarray | None = None
    z_mu: np.ndarray | None = None
    z_sigma: np.ndarray | None = None
    ll_history: list = field(default_factory=list)

    @property
    def trained(self) -> bool:
        return self.pi is not None

    @property
    def k(self) -> int:
        _require_trained(self)
        return self.pi.shape[0]

    @property
    def p(self) -> int:
        _require_trained(self)
        return self.z_mu.shape[1]


def _require_trained(model):
    if model is None or model.pi is None or model.z_mu is None or model.z_sigma is None:
        raise UntrainedModel("model has no fitted parameters")


def _validate_model(model):
    _require_trained(model)
    pi = np.asarray(model.pi, dtype=float)
    if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
        raise InvariantViolation("mixture weights must be nonnegative and sum to 1")
    k, p = model.z_mu.shape[:2]
    for i in range(k):
        for j in range(p):
            _require_spd(np.asarray(model.z_sigma[i, j]), model.z_mu.shape[2])


@dataclass
class EmConfig:
    max_iter: int = 200
    tol: float = 1e-6
    reg: float = 1e-6
    init: str = "time_bins"
    seed: int = 0


def _gauss_logpdf(x, mu, sigma):
    # x: (n, d) against a single Gaussian
    d = mu.shape[0]
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        raise NonSpdCovariance("covariance is not positive definite")
    diff = x - mu
    maha = np.einsum("nd,nd->n", diff, np.linalg.solve(sigma, diff.T).T)
    return -0.5 * (maha + logdet + d * _LOG_2PI)


def _logsumexp(a, axis):
    amax = np.max(a, axis=axis, keepdims=True)
    out = amax + np.log(np.sum(np.exp(a - amax), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def em_fit(demos, k: int, config: EmConfig | None = None) -> TpGmmModel:
    """Fit a K-component model to demonstrations (objects with .trajectory/.frames)."""
    points = [np.asarray(d.trajectory.points, dtype=float) for d in demos]
    frames = [list(d.frames) for d in demos]
    return em_fit_points(points, frames, k, config)


def em_fit_points(points_list, frames_list, k: int,
                  config: EmConfig | None = None) -> TpGmmModel:
    """EM on raw (t, x, y) arrays with one frame list per demonstration.

    The data are viewed once per frame in local coordinates; a component is a
    Gaussian per frame sharing one responsibility.  Each M-step covariance
    gains ``reg`` on the diagonal.  Stops when the relative objective
    improvement drops below ``tol`` or after ``max_iter`` iterations.
    """
    cfg = config or EmConfig()
    if k < 1:
        raise InvariantViolation(f"k = {k}")
    if not points_list or len(points_list) != len(frames_list):
        raise InvariantViolation("need matching, nonempty points and frames lists")
    p = len(frames_list[0])
    if p < 1 or any(len(f) != p for f in frames_list):
        raise InvariantViolation("every demonstration needs the same frame count")

    # local views: X[j] holds all points expressed in frame j of their own demo
    n_total = sum(len(pts) for pts in points_list)
    if n_total < k * 4:
        raise InsufficientData(f"{n_total} points cannot support {k} components")
    x_loc = np.empty((p, n_total, 3))
    pos = 0
    for pts, frames in zip(points_list, frames_list):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvariantViolation("demonstration points must be (n, 3)")
        for j, fr in enumerate(frames):
            a, b = fr.a_lifted, fr.b_lifted
            x_loc[j, pos:pos + len(pts)] = (pts - b) @ a  # A^T (xi - b)
        pos += len(pts)

    t_all = x_loc[0, :, 0]
    pi, z_mu, z_sigma = _init_params(x_loc, t_all, k, cfg)

    ll_history = []
    reinitialized = np.zeros(k, dtype=bool)
    log_gamma = None
    it = 0
    while it < cfg.max_iter:
        it += 1
        log_comp = np.zeros((k, n_total))
        for i in range(k):
            for j in range(p):
                log_comp[i] += _gauss_logpdf(x_loc[j], z_mu[i, j], z_sigma[i, j])
        log_joint = log_comp + np.log(pi)[:, None]
        log_norm = _logsumexp(log_joint, axis=0)
        ll = float(log_norm.sum())
        ll_history.append(ll)
        log_gamma = log_joint - log_norm

        gamma = np.exp(log_gamma)
        mass = gamma.sum(axis=1)

        low = np.flatnonzero(mass < 1e-8 * n_total)
        if low.size:
            for i in low:
                if reinitialized[i]:
                    raise CollapsedComponent(f"component {i} collapsed twice")
                reinitialized[i] = True
                worst = int(np.argmin(log_norm))
                for j in range(p):
                    z_mu[i, j] = x_loc[j, worst]
                    z_sigma[i, j] = _global_cov(x_loc[j], cfg.reg)
                pi[i] = 1.0 / k
            pi = pi / pi.sum()
            continue

        pi = mass / n_total
        for i in range(k):
            w = gamma[i] / mass[i]
            for j in range(p):
                mu = w @ x_loc[j]
                diff = x_loc[j] - mu
                sig = (w[:, None] * diff).T @ diff + cfg.reg * np.eye(3)
                z_mu[i, j] = mu
                z_sigma[i, j] = 0.5 * (sig + sig.T)

        if len(ll_history) > 1:
            prev = ll_history[-2]
            if abs(ll - prev) <= cfg.tol * max(1.0, abs(prev)):
                break

    return TpGmmModel(pi=pi, z_mu=z_mu, z_sigma=z_sigma, ll_history=ll_history)


def _global_cov(x, reg):
    diff = x - x.mean(axis=0)
    sig = diff.T @ diff / max(len(x) - 1, 1) + reg * np.eye(x.shape[1])
    return 0.5 * (sig + sig.T)


def _init_params(x_loc, t_all, k, cfg):
    p, n, d = x_loc.shape
    pi = np.full(k, 1.0 / k)
    z_mu = np.empty((k, p, d))
    z_sigma = np.empty((k, p, d, d))
    if cfg.init == "time_bins":
        bins = np.clip((t_all * k).astype(int), 0, k - 1)
        for i in range(k):
            sel = bins == i
            if sel.sum() < 2:
                sel = np.ones(n, dtype=bool)
            for j in range(p):
                z_mu[i, j] = x_loc[j, sel].mean(axis=0)
                z_sigma[i, j] = _global_cov(x_loc[j, sel], cfg.reg)
            pi[i] = sel.sum()
        pi = pi / pi.sum()
    elif cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        idx = rng.choice(n, size=k, replace=False)
        for i in range(k):
            for j in range(p):
                z_mu[i, j] = x_loc[j, idx[i]]
                z_sigma[i, j] = _global_cov(x_loc[j], cfg.reg)
    else:
        raise InvariantViolation(f"unknown init scheme {cfg.init!r}")
    return pi, z_mu, z_sigma


def mixture_density(model: TpGmmModel, frames, x) -> float | np.ndarray:
    """Density of the fused mixture at x (a (3,) point or (n, 3) batch)."""
    _require_trained(model)
    comps = [product_of_frame_gaussians(frames, model, i) for i in range(model.k)]
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    acc = np.zeros(len(pts))
    for w, g in zip(model.pi, comps):
        acc += w * np.exp(_gauss_logpdf(pts, g.mu, g.sigma))
    return float(acc[0]) if np.asarray(x).ndim == 1 else acc


def log_likelihood(model: TpGmmModel, demos) -> float:
    """Total log of the fused mixture density over all demonstration points."""
    _require_trained(model)
    total = 0.0
    for d in demos:
        comps = [product_of_frame_gaussians(d.frames, model, i) for i in range(model.k)]
        pts = np.asarray(d.trajectory.points, dtype=float)
        stack = np.stack([np.log(w) + _gauss_logpdf(pts, g.mu, g.sigma)
                          for w, g in zip(model.pi, comps)])
        total += float(_logsumexp(stack, axis=0).sum())
    return total


def gmr_trajectory(model: TpGmmModel, frames, n_samples: int = TRAJECTORY_LEN) -> Trajectory:
    """Reproduce a trajectory for new frames by conditioning on time.

    Component weights follow the time marginals; each component contributes
    its conditional mean ``mu_y + sigma_yt / sigma_tt * (t - mu_t)``.
    """
    _require_trained(model)
    if n_samples < 2:
        raise InvariantViolation(f"n_samples = {n_samples}")
    comps = [product_of_frame_gaussians(frames, model, i) for i in range(model.k)]
    t = np.linspace(0.0, 1.0, n_samples)

    mu_t = np.array([g.mu[0] for g in comps])
    var_t = np.array([g.sigma[0, 0] for g in comps])
    if np.any(var_t <= 0):
        raise NonSpdCovariance("fused time variance must be positive")
    mu_y = np.stack([g.mu[1:] for g in comps])
    sig_yt = np.stack([g.sigma[1:, 0] for g in comps])

    dt = t[None, :] - mu_t[:, None]
    logw = (np.log(model.pi)[:, None]
            - 0.5 * (np.log(2.0 * np.pi * var_t)[:, None] + dt ** 2 / var_t[:, None]))
    logw = logw - _logsumexp(logw, axis=0)[None, :]
    w = np.exp(logw)

    cond = mu_y[:, None, :] + (sig_yt / var_t[:, None])[:, None, :] * dt[:, :, None]
    xy = np.einsum("kt,ktd->td", w, cond)
    return Trajectory(np.column_stack([t, xy]))


MODEL_SCHEMA_VERSION = 1


def save_model(model: TpGmmModel, path) -> None:
    """Write the fitted parameters as versioned JSON (exact float round trip)."""
    _validate_model(model)
    payload = {
        "version": MODEL_SCHEMA_VERSION,
        "K": int(model.k),
        "P": int(model.p),
        "D": int(model.z_mu.shape[2] - 1),
        "pi": np.asarray(model.pi).tolist(),
        "Z_mu": np.asarray(model.z_mu).tolist(),
        "Z_sigma": np.asarray(model.z_sigma).tolist(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)


def load_model(path) -> TpGmmModel:
    if not os.path.exists(path):
        raise MissingFile(str(path))
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("version") != MODEL_SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"model schema {payload.get('version')!r}")
    try:
        k, p, d = int(payload["K"]), int(payload["P"]), int(payload["D"])
        pi = np.asarray(payload["pi"], dtype=float)
        z_mu = np.asarray(payload["Z_mu"], dtype=float)
        z_sigma = np.asarray(payload["Z_sigma"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise InvariantViolation(f"malformed model file: {e}") from e
    if pi.shape != (k,) or z_mu.shape != (k, p, d + 1) or z_sigma.shape != (k, p, d + 1, d + 1):
        raise InvariantViolation("model arrays have inconsistent shapes")
    model = TpGmmModel(pi=pi, z_mu=z_mu, z_sigma=z_sigma)
    _validate_model(model)
    return model
