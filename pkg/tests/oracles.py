"""Independent reference computations used by the test-suite.

Nothing here calls into the fast paths it is used to check: circuits are
built as explicit dense matrices, the Heisenberg exponential goes through
``scipy.linalg.expm``, and the SVC dual is solved by accelerated projected
gradient.
"""
import numpy as np
import scipy.linalg

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def kron_all(mats):
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def single_on(op, q, n):
    """``op`` on qubit q of n (qubit 0 is the least-significant bit)."""
    # kron order is most-significant first, i.e. qubit n-1 .. 0
    return kron_all([op if k == q else I2 for k in reversed(range(n))])


def embed_two_qubit(gate, q_a, q_b, n):
    """Dense 2^n matrix of a 4x4 gate whose local index is 2*bit(q_a) + bit(q_b)."""
    dim = 1 << n
    U = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        ba, bb = (col >> q_a) & 1, (col >> q_b) & 1
        local_in = 2 * ba + bb
        rest = col & ~((1 << q_a) | (1 << q_b))
        for local_out in range(4):
            oa, ob = local_out >> 1, local_out & 1
            row = rest | (oa << q_a) | (ob << q_b)
            U[row, col] += gate[local_out, local_in]
    return U


def heisenberg_expm(theta):
    h = np.kron(X, X) + np.kron(Y, Y) + np.kron(Z, Z)
    return scipy.linalg.expm(-1j * theta * h)


def heisenberg_eig(theta):
    h = np.kron(X, X) + np.kron(Y, Y) + np.kron(Z, Z)
    w, V = np.linalg.eigh(h)
    return (V * np.exp(-1j * theta * w)) @ V.conj().T


def iqp_dense(x, lam):
    """U_Z H U_Z H |0> with U_Z = exp(i (sum lam x_j Z_j + sum lam^2 x_j x_j' Z_j Z_j'))."""
    d = len(x)
    gen = np.zeros((1 << d, 1 << d), dtype=complex)
    for j in range(d):
        gen += lam * x[j] * single_on(Z, j, d)
        for jp in range(d):
            gen += lam**2 * x[j] * x[jp] * single_on(Z, j, d) @ single_on(Z, jp, d)
    UZ = scipy.linalg.expm(1j * gen)
    Hd = kron_all([H] * d)
    psi0 = np.zeros(1 << d, dtype=complex)
    psi0[0] = 1
    return UZ @ Hd @ UZ @ Hd @ psi0


def hamevo_dense(x, t, T, init_amps):
    d = len(x)
    n = d + 1
    step = np.eye(1 << n, dtype=complex)
    for j in range(d):
        g = heisenberg_expm(t / T * x[j])
        step = embed_two_qubit(g, j, j + 1, n) @ step
    return np.linalg.matrix_power(step, T) @ init_amps


def dual_objective(alpha, K, y):
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def _project(v, y, C):
    """Euclidean projection onto {0 <= a <= C, y.a = 0} by bisection on the multiplier."""
    def excess(nu):
        return y @ np.clip(v - nu * y, 0, C)

    lo, hi = -1.0, 1.0
    while excess(lo) < 0:
        lo *= 2
    while excess(hi) > 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi) * y, 0, C)


def svc_dual_pg(K, y, C, tol=1e-10, max_iter=200000):
    """Accelerated projected gradient on the SVC dual; returns alpha."""
    Q = K * np.outer(y, y)
    L = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    a = np.zeros(len(y))
    z = a.copy()
    tk = 1.0
    for _ in range(max_iter):
        grad = 1.0 - Q @ z
        a_new = _project(z + grad / L, y, C)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * tk * tk))
        z = a_new + (tk - 1) / t_new * (a_new - a)
        if np.max(np.abs(a_new - a)) < tol:
            a = a_new
            break
        a, tk = a_new, t_new
    return a


def random_psd_problem(rng, n):
    pts = rng.standard_normal((n, 3))
    sq = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    K = np.exp(-0.5 * sq)
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    y[0], y[1] = 1.0, -1.0
    return K, y
