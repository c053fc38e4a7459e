"""Independent scalar reference implementations used as test oracles.

Plain Python floats and loops only: no numpy and nothing from the
package, so an error in the vectorised code cannot leak in here.
"""

import math


def sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def matvec(W, x):
    return [sum(W[i][j] * x[j] for j in range(len(x))) for i in range(len(W))]


def add(a, b):
    return [p + q for p, q in zip(a, b)]


def gdu(x, z, t, P):
    """Entry-by-entry transcription of the gated diffusive unit.

    ``P`` holds nested-list matrices W_f, W_e, W_g, W_r, W_u and bias
    lists b_f, ..., b_u. Returns (h, gates dict).
    """
    xzt = list(x) + list(z) + list(t)
    S = len(z)

    def gate(name):
        pre = add(matvec(P["W_" + name], xzt), P["b_" + name])
        return [sig(v) for v in pre]

    f, e, g, r = gate("f"), gate("e"), gate("g"), gate("r")
    zt = [f[i] * z[i] for i in range(S)]
    tt = [e[i] * t[i] for i in range(S)]

    def u(zz, tt_):
        pre = add(matvec(P["W_u"], list(x) + zz + tt_), P["b_u"])
        return [math.tanh(v) for v in pre]

    both, adj, fgt, plain = u(zt, tt), u(list(z), tt), u(zt, list(t)), u(list(z), list(t))
    h = [
        g[i] * r[i] * both[i]
        + (1 - g[i]) * r[i] * adj[i]
        + g[i] * (1 - r[i]) * fgt[i]
        + (1 - g[i]) * (1 - r[i]) * plain[i]
        for i in range(S)
    ]
    return h, {"f": f, "e": e, "g": g, "r": r}


def gru_latent(indices, P):
    """GRU over embedding rows, sum of hidden states, sigmoid fusion.

    ``indices`` are the non-padding token indices in order.
    """
    H = len(P["U_z"])
    h = [0.0] * H
    total = [0.0] * H
    for idx in indices:
        x = P["embedding"][idx]
        z = [sig(v) for v in add(add(matvec(P["W_z"], x), matvec(P["U_z"], h)), P["b_z"])]
        r = [sig(v) for v in add(add(matvec(P["W_r"], x), matvec(P["U_r"], h)), P["b_r"])]
        rh = [r[i] * h[i] for i in range(H)]
        c = [math.tanh(v) for v in add(add(matvec(P["W_h"], x), matvec(P["U_h"], rh)), P["b_h"])]
        h = [z[i] * c[i] + (1 - z[i]) * h[i] for i in range(H)]
        total = add(total, h)
    return [sig(v) for v in add(matvec(P["W_i"], total), P["b_i"])]


def mean_rows(rows, dim):
    if not rows:
        return [0.0] * dim
    return [sum(r[j] for r in rows) / len(rows) for j in range(dim)]


def central_difference(f, values, step=1e-5):
    """Numeric gradient of scalar ``f(list)`` by central differences."""
    grad = []
    for i in range(len(values)):
        up = list(values)
        down = list(values)
        up[i] += step
        down[i] -= step
        grad.append((f(up) - f(down)) / (2 * step))
    return grad


def tolist(params):
    """numpy-valued dict to nested lists."""
    return {k: v.tolist() for k, v in params.items()}
