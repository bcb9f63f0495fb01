"""Left-invariant geometry engine.

Everything here works in exponential coordinates with respect to the
adapted orthonormal frame (nu | zeta | second-derived blocks).  The frame
fields, covariant derivatives and the first-order geodesic system for
three-step groups are driven by the frame constants A, B, C; two-step and
abelian algebras run through the same code with empty blocks.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import least_squares

from . import linalg as la
from .algebra import AdaptedFrame
from .group import GroupElement

HALF = Fraction(1, 2)


def _rk4_kernel(A, B, C, J, K, T, vbar, y0, h, n_steps, stride, out):
    """Fixed-step RK4 on the first-order geodesic system; fills ``out`` with
    samples every ``stride`` steps (out[0] = y0).  Plain loops so the same
    body runs under numba or pure Python."""
    n = J + K + T
    y = y0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    out[0] = y0
    row = 1
    for s in range(n_steps):
        _rhs_kernel(A, B, C, J, K, T, vbar, y, k1)
        for i in range(n):
            tmp[i] = y[i] + 0.5 * h * k1[i]
        _rhs_kernel(A, B, C, J, K, T, vbar, tmp, k2)
        for i in range(n):
            tmp[i] = y[i] + 0.5 * h * k2[i]
        _rhs_kernel(A, B, C, J, K, T, vbar, tmp, k3)
        for i in range(n):
            tmp[i] = y[i] + h * k3[i]
        _rhs_kernel(A, B, C, J, K, T, vbar, tmp, k4)
        for i in range(n):
            y[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if (s + 1) % stride == 0:
            out[row] = y
            row += 1
    return y


def _rhs_kernel(A, B, C, J, K, T, vbar, y, out):
    for j in range(J):
        s = vbar[j]
        for l in range(J):
            xl = y[l]
            if xl != 0.0:
                for k in range(K):
                    s -= xl * A[j, l, k] * vbar[J + k]
                for t in range(T):
                    s -= xl * B[j, l, t] * vbar[J + K + t]
        for k in range(K):
            zk = y[J + k]
            for t in range(T):
                s -= zk * C[j, k, t] * vbar[J + K + t]
        for t in range(T):
            wt = vbar[J + K + t]
            if wt != 0.0:
                for i in range(J):
                    for l in range(J):
                        acc = 0.0
                        for k in range(K):
                            acc += C[i, k, t] * A[j, l, k]
                        s -= 0.5 * y[i] * y[l] * wt * acc
        out[j] = s
    for k in range(K):
        s = vbar[J + k]
        for i in range(J):
            for j in range(J):
                s += 0.5 * y[i] * out[j] * A[i, j, k]
        for j in range(J):
            for t in range(T):
                s += y[j] * vbar[J + K + t] * C[j, k, t]
        out[J + k] = s
    for t in range(T):
        s = vbar[J + K + t]
        for i in range(J):
            for j in range(J):
                s += 0.5 * y[i] * out[j] * B[i, j, t]
        for j in range(J):
            for k in range(K):
                s += 0.5 * C[j, k, t] * (y[j] * out[J + k] - out[j] * y[J + k])
        for i in range(J):
            for j in range(J):
                for l in range(J):
                    acc = 0.0
                    for k in range(K):
                        acc += C[i, k, t] * A[l, j, k]
                    s -= y[i] * out[j] * y[l] * acc / 6.0
        out[J + K + t] = s


try:  # pragma: no cover - exercised implicitly everywhere
    import numba

    _rhs_kernel = numba.njit(cache=True)(_rhs_kernel)
    _rk4_kernel = numba.njit(cache=True)(_rk4_kernel)
except ImportError:  # pragma: no cover
    pass


class GeodesicSpace:
    """Float-side view of an adapted frame with cached tensors."""

    def __init__(self, frame: AdaptedFrame):
        self.frame = frame
        self.J, self.K, self.T = frame.J, frame.K, frame.T
        self.n = self.J + self.K + self.T
        self.A = frame.A_np()
        self.B = frame.B_np()
        self.C = frame.C_np()
        self.ct = frame.adapted_bracket_tensor()
        self._to_adapted = frame.to_adapted_np()

    def adapted_log(self, g: GroupElement):
        """Adapted coordinates of log g (float)."""
        v = np.array([float(x) for x in g.log])
        return self._to_adapted @ v

    def adapted_exact(self, vec):
        return self.frame.to_adapted(vec)

    def bracket_np(self, u, v):
        return np.einsum("i,j,ijk->k", u, v, self.ct)

    def bch_np(self, u, v):
        b = self.bracket_np(u, v)
        return (u + v + 0.5 * b
                + np.einsum("i,j,ijk->k", u, b, self.ct) / 12.0
                - np.einsum("i,j,ijk->k", v, b, self.ct) / 12.0)

    def exp_ad_np(self, a, x):
        b = self.bracket_np(a, x)
        return x + b + 0.5 * self.bracket_np(a, b)

    def ad_matrix_np(self, v):
        # AD[a, b] = [v, e_b]_a
        return np.einsum("i,iba->ab", v, self.ct)

    def is_central(self, g: GroupElement):
        L = self.frame.algebra
        return all(la.is_zero_vec(L.bracket(list(g.log), L.basis_vector(j)))
                   for j in range(L.dim))


def frame_fields_at(point, space: GeodesicSpace):
    """Matrix of the left-invariant frame fields at exp(point).

    Column b holds the coordinate components of the b-th frame field; equals
    the differential of left translation applied to the frame, i.e.
    E_b + (1/2)[v, E_b] + (1/12)[v, [v, E_b]] in exponential coordinates.
    """
    ADV = space.ad_matrix_np(np.asarray(point, dtype=float))
    return np.eye(space.n) + 0.5 * ADV + (ADV @ ADV) / 12.0


def covariant_derivative(u, v, frame: AdaptedFrame):
    """nabla_u v for constant frames, exactly, in adapted coordinates.

    Uses the left-invariant formula
    <nabla_U V, E> = (1/2)(<[E,U],V> + <[E,V],U> + <[U,V],E>).
    """
    n = frame.J + frame.K + frame.T
    u = [la.frac(x) for x in u]
    v = [la.frac(x) for x in v]
    ct = _exact_adapted_tensor(frame)

    def brk(a, b):
        out = [Fraction(0)] * n
        for (i, j), coeffs in ct.items():
            f = a[i] * b[j] - a[j] * b[i]
            if f:
                for k, c in coeffs.items():
                    out[k] += f * c
        return out

    uv = brk(u, v)
    out = []
    for cidx in range(n):
        e = [Fraction(0)] * n
        e[cidx] = Fraction(1)
        val = HALF * (la.vec_dot(brk(e, u), v) + la.vec_dot(brk(e, v), u)
                      + uv[cidx])
        out.append(val)
    return out


def _exact_adapted_tensor(frame: AdaptedFrame):
    ct = {}
    J, K = frame.J, frame.K

    def put(i, j, k, v):
        ct.setdefault((i, j), {})[k] = ct.setdefault((i, j), {}).get(k, Fraction(0)) + v

    for (i, j, k), v in frame.A.items():
        if i < j:
            put(i, j, J + k, v)
    for (i, j, t), v in frame.B.items():
        if i < j:
            put(i, j, J + K + t, v)
    for (i, k, t), v in frame.C.items():
        put(i, J + k, J + K + t, v)
    return ct


def geodesic_rhs(y, vbar, space: GeodesicSpace):
    """First-order geodesic system for step <= 3 in adapted coordinates.

    vbar holds the (constant) initial-velocity components; the state y holds
    the exponential coordinates along the flow.
    """
    J, K, T = space.J, space.K, space.T
    x, z = y[:J], y[J:J + K]
    xb, zb, wb = vbar[:J], vbar[J:J + K], vbar[J + K:]
    A, B, C = space.A, space.B, space.C
    xdot = xb.copy()
    if J:
        if K:
            xdot = xdot - np.einsum("jlk,l,k->j", A, x, zb)
        if T:
            xdot = xdot - np.einsum("jlt,l,t->j", B, x, wb)
            if K:
                xdot = xdot - np.einsum("jkt,k,t->j", C, z, wb)
                xdot = xdot - 0.5 * np.einsum("ikt,jlk,i,l,t->j", C, A, x, x, wb)
    zdot = zb.copy()
    if K:
        if J:
            zdot = zdot + 0.5 * np.einsum("ijk,i,j->k", A, x, xdot)
            if T:
                zdot = zdot + np.einsum("jkt,j,t->k", C, x, wb)
    wdot = wb.copy()
    if T and J:
        wdot = wdot + 0.5 * np.einsum("ijt,i,j->t", B, x, xdot)
        if K:
            wdot = wdot - 0.5 * np.einsum("jkt,j,k->t", C, xdot, z)
            wdot = wdot + 0.5 * np.einsum("jkt,j,k->t", C, x, zdot)
            wdot = wdot - np.einsum("ikt,ljk,i,j,l->t", C, A, x, xdot, x) / 6.0
    return np.concatenate([xdot, zdot, wdot])


@dataclass
class GeodesicInitialData:
    velocity: np.ndarray           # adapted-frame components, unit norm
    point: GroupElement = None     # default: identity

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=float)
        nrm = float(np.linalg.norm(self.velocity))
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError("initial velocity must be unit speed")


@dataclass
class Trajectory:
    ts: np.ndarray
    ys: np.ndarray                 # sample points, adapted coordinates
    vbar: np.ndarray
    step: float
    order: int = 4

    def endpoint(self):
        return self.ys[-1]


def _rk4_step(y, h, vbar, space):
    k1 = geodesic_rhs(y, vbar, space)
    k2 = geodesic_rhs(y + 0.5 * h * k1, vbar, space)
    k3 = geodesic_rhs(y + 0.5 * h * k2, vbar, space)
    k4 = geodesic_rhs(y + h * k3, vbar, space)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _run_kernel(space, vbar, y0, h, n_steps, stride=1):
    rows = 1 + (n_steps // stride if stride else 0)
    out = np.empty((rows, space.n))
    if n_steps == 0:
        out[0] = y0
        return out, y0.copy()
    yend = _rk4_kernel(space.A, space.B, space.C, space.J, space.K, space.T,
                       np.asarray(vbar, dtype=float), np.asarray(y0, dtype=float),
                       float(h), int(n_steps), int(stride), out)
    return out, yend


def integrate(init: GeodesicInitialData, space: GeodesicSpace, duration,
              step=1e-3, y0=None) -> Trajectory:
    """Classical fixed-step order-4 integration from the identity."""
    if duration < 0 or step <= 0:
        raise ValueError("duration must be >= 0 and step > 0")
    vbar = np.asarray(init.velocity, dtype=float)
    y = np.zeros(space.n) if y0 is None else np.asarray(y0, dtype=float)
    n_full = int(np.floor(float(duration) / step + 1e-12))
    rem = float(duration) - n_full * step
    out, yend = _run_kernel(space, vbar, y, step, n_full)
    ts = np.arange(n_full + 1) * step
    if rem > 1e-12:
        out2, yend = _run_kernel(space, vbar, yend, rem, 1)
        out = np.vstack([out, out2[1:]])
        ts = np.append(ts, duration)
    return Trajectory(ts, out, vbar, step)


def frame_velocity(traj: Trajectory, space: GeodesicSpace, index):
    """Frame components of the velocity at a sample (solve against the frame)."""
    y = traj.ys[index]
    ydot = geodesic_rhs(y, traj.vbar, space)
    return np.linalg.solve(frame_fields_at(y, space), ydot)


def speed_profile(traj: Trajectory, space: GeodesicSpace, stride=None):
    idx = range(0, len(traj.ts), stride or max(1, len(traj.ts) // 64))
    return np.array([np.linalg.norm(frame_velocity(traj, space, i)) for i in idx])


def translation_residual(x_log, traj_a: Trajectory, traj_b: Trajectory,
                         space: GeodesicSpace):
    """max_s | log((x sigma(s))^{-1} sigma(s + lam)) | over the common grid.

    traj_b must be the continuation of traj_a started at sigma(lam) with the
    same velocity constants.
    """
    m = min(len(traj_a.ys), len(traj_b.ys))
    worst = 0.0
    stride = max(1, m // 200)
    for i in range(0, m, stride):
        u = space.bch_np(x_log, traj_a.ys[i])
        d = space.bch_np(-u, traj_b.ys[i])
        worst = max(worst, float(np.linalg.norm(d)))
    return worst


def element_translation_residual(gamma: GroupElement, traj: Trajectory, lam,
                                 space: GeodesicSpace):
    """Residual for a trajectory that covers [0, lam + margin] on its own grid."""
    if lam < 0:
        raise ValueError("period must be positive")
    x_log = space.adapted_log(gamma)
    # continuation from sigma(lam)
    end = integrate(GeodesicInitialData(traj.vbar / np.linalg.norm(traj.vbar)),
                    space, lam, step=traj.step).endpoint()
    duration = float(traj.ts[-1])
    contin = integrate(GeodesicInitialData(traj.vbar / np.linalg.norm(traj.vbar)),
                       space, duration, step=traj.step, y0=end)
    return translation_residual(x_log, traj, contin, space)


@dataclass
class TranslationCertificate:
    gamma: GroupElement
    x_log: np.ndarray              # conjugated translator, adapted coordinates
    conjugator_log: np.ndarray     # log p with p^{-1} gamma p = exp(x_log)
    lam: float
    velocity: np.ndarray
    trajectory: Trajectory
    residual_translation: float
    residual_orthogonality: float = None
    residual_horizontality: float = None

    def to_dict(self):
        return {
            "gamma_log": [str(c) for c in self.gamma.log],
            "x_log": list(map(float, self.x_log)),
            "conjugator_log": list(map(float, self.conjugator_log)),
            "lambda": self.lam,
            "velocity": list(map(float, self.velocity)),
            "residual_translation": self.residual_translation,
            "residual_orthogonality": self.residual_orthogonality,
            "residual_horizontality": self.residual_horizontality,
        }


def check_translation_orthogonality(cert: TranslationCertificate,
                                    space: GeodesicSpace):
    """Residual of the translated-geodesic orthogonality identity:
    the bracket image [log x, g] must be metric-orthogonal to the initial
    velocity.  Returns the max projection onto an orthonormal basis of the
    image."""
    x = cert.x_log
    cols = []
    for b in range(space.n):
        e = np.zeros(space.n)
        e[b] = 1.0
        cols.append(space.bracket_np(x, e))
    M = np.array(cols).T
    q, r = np.linalg.qr(M)
    keep = [i for i in range(min(M.shape)) if abs(r[i, i]) > 1e-10]
    if not keep:
        return 0.0
    v0 = cert.velocity / np.linalg.norm(cert.velocity)
    return float(np.max(np.abs(q[:, keep].T @ v0)))


def check_horizontality(cert: TranslationCertificate, space: GeodesicSpace):
    """Max w-frame component of the velocity along the trajectory; None when
    the translating element is central (not applicable)."""
    if space.is_central(cert.gamma):
        return None
    if space.T == 0:
        return 0.0
    traj = cert.trajectory
    worst = 0.0
    stride = max(1, len(traj.ts) // 100)
    for i in range(0, len(traj.ts), stride):
        a = frame_velocity(traj, space, i)
        worst = max(worst, float(np.max(np.abs(a[space.J + space.K:]))))
    return worst


def _residual_points(x_log, v_unit, lam, space, n_pts, substep):
    """Grid residuals log((x sigma(s_i))^{-1} sigma(s_i + lam)) in one pass."""
    seg = lam / n_pts
    sub = max(1, int(np.ceil(seg / substep)))
    h = seg / sub
    samples, _ = _run_kernel(space, v_unit, np.zeros(space.n), h,
                             2 * n_pts * sub, stride=sub)
    out = []
    for i in range(n_pts + 1):
        u = space.bch_np(x_log, samples[i])
        out.append(space.bch_np(-u, samples[i + n_pts]))
    return np.concatenate(out)


def _threads():
    try:
        return max(1, int(os.environ.get("NILSPEC_THREADS", "1")))
    except ValueError:
        return 1


def _search_translations(gamma, space, lam_hint, velocity_hint, seed, n_starts,
                         certify_tol, step, coarse_substep, n_pts, collect_all):
    if gamma.is_identity():
        raise ValueError("gamma must not be the identity")
    g_log = space.adapted_log(gamma)
    central = space.is_central(gamma)
    n = space.n
    nA = 0 if central else space.J + space.K
    lam0 = lam_hint if lam_hint else max(float(np.linalg.norm(g_log)), 0.5)

    rng = np.random.default_rng(seed)
    starts = []
    if velocity_hint is not None:
        v = np.asarray(velocity_hint, dtype=float)
        starts.append(np.concatenate([v / np.linalg.norm(v), [lam0], np.zeros(nA)]))
    gdir = g_log / np.linalg.norm(g_log)
    starts.append(np.concatenate([gdir, [lam0], np.zeros(nA)]))
    while len(starts) < n_starts:
        v = rng.normal(size=n)
        v /= np.linalg.norm(v)
        lam = lam0 * float(rng.uniform(0.7, 1.3))
        starts.append(np.concatenate([v, [lam], 0.2 * rng.normal(size=nA)]))

    def unpack(theta):
        v = theta[:n]
        v = v / np.linalg.norm(v)
        lam = abs(theta[n])
        if central or nA == 0:
            x = g_log
            A = np.zeros(n)
        else:
            A = np.zeros(n)
            A[:nA] = theta[n + 1:]
            x = space.exp_ad_np(A, g_log)
        return v, lam, x, A

    def fun(theta):
        v, lam, x, _ = unpack(theta)
        if lam < 1e-6:
            return np.full((n_pts + 1) * n, 1e3)
        return _residual_points(x, v, lam, space, n_pts, coarse_substep)

    def attempt(idx_theta):
        idx, theta0 = idx_theta
        try:
            sol = least_squares(fun, theta0, method="lm", max_nfev=400)
        except Exception:
            return (idx, None, np.inf)
        v, lam, x, A = unpack(sol.x)
        if lam < 1e-6:
            return (idx, None, np.inf)
        fine = _residual_points(x, v, lam, space, 2 * n_pts, step)
        res = float(np.max(np.linalg.norm(fine.reshape(-1, n), axis=1)))
        return (idx, (v, lam, x, A), res)

    results = []
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(attempt, enumerate(starts)))
    else:
        for item in enumerate(starts):
            r = attempt(item)
            results.append(r)
            if not collect_all and r[2] < certify_tol:
                break
    results.sort(key=lambda r: (r[2], r[0]))

    certs = []
    for idx, best, res in results:
        if best is None or res >= certify_tol:
            continue
        v, lam, x, A = best
        traj = integrate(GeodesicInitialData(v), space, lam, step=step)
        cert = TranslationCertificate(
            gamma=gamma, x_log=x, conjugator_log=-A, lam=float(lam),
            velocity=v, trajectory=traj, residual_translation=res)
        cert.residual_orthogonality = check_translation_orthogonality(cert, space)
        cert.residual_horizontality = check_horizontality(cert, space)
        certs.append(cert)
        if not collect_all:
            break
    return certs


def find_translated_geodesic(gamma: GroupElement, space: GeodesicSpace,
                             lam_hint=None, velocity_hint=None, seed=0,
                             n_starts=32, certify_tol=1e-6, step=1e-3,
                             coarse_substep=2e-2, n_pts=8):
    """Search for a unit-speed geodesic through e translated by a conjugate
    of gamma.

    Minimizes the translation residual over (velocity, period, conjugator)
    by multi-start local least squares; a certificate is produced only when
    the fine-grid residual beats ``certify_tol``.  Failure returns None and
    proves nothing.
    """
    certs = _search_translations(gamma, space, lam_hint, velocity_hint, seed,
                                 n_starts, certify_tol, step, coarse_substep,
                                 n_pts, collect_all=False)
    return certs[0] if certs else None


def collect_translation_periods(gamma: GroupElement, space: GeodesicSpace,
                                lam_hints=(), seed=0, n_starts=24,
                                certify_tol=1e-6, step=1e-3, dedupe=1e-4):
    """Multi-start sweep collecting every certified translation period.

    Returns a sorted list of (lam, certificate); periods closer than
    ``dedupe`` are merged, keeping the smallest residual.
    """
    found = {}
    hints = list(lam_hints) or [None]
    for h_i, hint in enumerate(hints):
        certs = _search_translations(
            gamma, space, hint, None, seed + 1000 * h_i, n_starts,
            certify_tol, step, 2e-2, 8, collect_all=True)
        for cert in certs:
            key = None
            for lam in found:
                if abs(lam - cert.lam) < max(dedupe, 1e-7 * cert.lam):
                    key = lam
                    break
            if key is None:
                found[cert.lam] = cert
            elif cert.residual_translation < found[key].residual_translation:
                found[key] = cert
    return sorted(found.items())


def certificate_for_velocity(gamma: GroupElement, space: GeodesicSpace,
                             velocity, lam, conjugator_log=None, step=1e-3,
                             n_pts=16):
    """Build and measure a certificate for explicitly known data (no search)."""
    v = np.asarray(velocity, dtype=float)
    v = v / np.linalg.norm(v)
    g_log = space.adapted_log(gamma)
    if conjugator_log is None:
        x = g_log
        A = np.zeros(space.n)
    else:
        A = -np.asarray(conjugator_log, dtype=float)
        x = space.exp_ad_np(A, g_log)
    fine = _residual_points(x, v, lam, space, n_pts, step)
    res = float(np.max(np.linalg.norm(fine.reshape(-1, space.n), axis=1)))
    traj = integrate(GeodesicInitialData(v), space, lam, step=step)
    cert = TranslationCertificate(
        gamma=gamma, x_log=x, conjugator_log=-A, lam=float(lam), velocity=v,
        trajectory=traj, residual_translation=res)
    cert.residual_orthogonality = check_translation_orthogonality(cert, space)
    cert.residual_horizontality = check_horizontality(cert, space)
    return cert


def solve_conjugation_float(space: GeodesicSpace, x_log, y_log, tol=1e-8):
    """Float witness A with exp(ad A) x_log ~= y_log, or None.

    Linearizes exactly as in the rational solver: [A, (X+Y)/2] = Y - X.
    """
    X = np.asarray(x_log, dtype=float)
    Y = np.asarray(y_log, dtype=float)
    mid = 0.5 * (X + Y)
    cols = []
    for b in range(space.n):
        e = np.zeros(space.n)
        e[b] = 1.0
        cols.append(space.bracket_np(e, mid))
    M = np.array(cols).T
    A, *_ = np.linalg.lstsq(M, Y - X, rcond=None)
    if np.linalg.norm(space.exp_ad_np(A, X) - Y) > tol * max(1.0, np.linalg.norm(Y)):
        return None
    return A


class LiftabilityError(ValueError):
    pass


def horizontal_lift(parent_space: GeodesicSpace, quotient_space: GeodesicSpace,
                    quotient_data, velocity, duration, step=1e-3) -> Trajectory:
    """Horizontal lift through e of the quotient geodesic with the given
    (quotient, unit) initial velocity.

    Requires the parent adapted frame to project block-by-block onto the
    quotient adapted frame, which is checked exactly.
    """
    _check_frame_compatibility(parent_space, quotient_space, quotient_data)
    J, K, T = parent_space.J, parent_space.K, parent_space.T
    nq = quotient_space.n
    if nq != J + K:
        raise LiftabilityError("quotient dimensions do not match parent blocks")
    vq = np.asarray(velocity, dtype=float)
    vq = vq / np.linalg.norm(vq)

    def rhs(state):
        yq, _ = state[:nq], state[nq:]
        dq = geodesic_rhs(yq, vq, quotient_space)
        aq = np.linalg.solve(frame_fields_at(yq, quotient_space), dq)
        y_par = np.concatenate([yq, state[nq:]])
        M = frame_fields_at(y_par, parent_space)
        dw = M[J + K:, :J + K] @ aq
        return np.concatenate([dq, dw])

    y = np.zeros(nq + T)
    ts = [0.0]
    ys = [y.copy()]
    remaining = float(duration)
    t = 0.0
    while remaining > 1e-15:
        h = min(step, remaining)
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        remaining -= h
        ts.append(t)
        ys.append(y.copy())
    vbar = np.concatenate([vq, np.zeros(T)])
    return Trajectory(np.array(ts), np.array(ys), vbar, step)


def _check_frame_compatibility(parent_space, quotient_space, quotient_data):
    pf = parent_space.frame
    qf = quotient_space.frame
    pairs = list(zip(pf.X + pf.Z, qf.X + qf.Z, strict=True))
    for v, vbar in pairs:
        if quotient_data.project_vec(v) != vbar:
            raise LiftabilityError(
                "parent adapted frame does not project onto the quotient frame")
