"""Straight-line scalar reimplementations used as independent test oracles.

Nothing here imports the package's numeric code; parameters are read from a
``ModelParams`` and converted to nested Python lists of floats.
"""

import math
from decimal import Decimal, getcontext

getcontext().prec = 50


def schedule_decimal(T, beta_start, beta_end):
    """(beta, alpha_bar) lists of Decimals, recomputed from the closed form."""
    bs, be = Decimal(beta_start), Decimal(beta_end)
    lo, hi = bs.sqrt(), be.sqrt()
    betas, abar, prod = [], [], Decimal(1)
    for t in range(1, T + 1):
        if T == 1 or bs == be:
            b = bs
        else:
            b = (lo + Decimal(t - 1) / Decimal(T - 1) * (hi - lo)) ** 2
        prod *= 1 - b
        betas.append(b)
        abar.append(prod)
    return betas, abar


def cumprod_decimal(beta):
    out, prod = [], Decimal(1)
    for b in beta:
        prod *= 1 - Decimal(float(b))
        out.append(prod)
    return out


def diffuse_scalar(x0, eps, abar):
    a, b = Decimal(abar).sqrt(), (1 - Decimal(abar)).sqrt()
    return [float(a * Decimal(float(x)) + b * Decimal(float(e))) for x, e in zip(x0, eps)]


def x0_from_eps_scalar(xt, eps, abar):
    a, b = Decimal(abar).sqrt(), (1 - Decimal(abar)).sqrt()
    return [float((Decimal(float(x)) - b * Decimal(float(e))) / a) for x, e in zip(xt, eps)]


def eps_from_x0_scalar(xt, x0, abar):
    a, b = Decimal(abar).sqrt(), (1 - Decimal(abar)).sqrt()
    return [float((Decimal(float(x)) - a * Decimal(float(y))) / b) for x, y in zip(xt, x0)]


# --------------------------------------------------------------------------
# network
# --------------------------------------------------------------------------

def _l(a):
    return a.tolist()


def layernorm(x, gain, bias, eps=1e-5):
    n = len(x)
    mean = sum(x) / n
    var = sum((v - mean) ** 2 for v in x) / n
    inv = 1.0 / math.sqrt(var + eps)
    return [(v - mean) * inv * g + b for v, g, b in zip(x, gain, bias)]


def silu(v):
    return v / (1.0 + math.exp(-v))


def linear(x, weight, bias):
    # weight is (fan_in, fan_out)
    return [sum(x[i] * weight[i][j] for i in range(len(x))) + bias[j] for j in range(len(bias))]


def unit(x, norm, lin):
    h = layernorm(x, _l(norm.gain), _l(norm.bias))
    h = [silu(v) for v in h]
    return linear(h, _l(lin.weight), _l(lin.bias))


def block(p, x, temb):
    h1 = unit(x, p.in_norm, p.in_linear)
    c = unit(temb, p.temb_norm, p.temb_linear)
    h2 = [a + b for a, b in zip(h1, c)]
    o = unit(h2, p.out_norm, p.out_linear)
    return [a + b for a, b in zip(x, o)]


def timestep_embedding(t, E):
    out = []
    for i in range(E // 2):
        w = 10000.0 ** (-(2 * i) / E)
        out += [math.sin(t * w), math.cos(t * w)]
    return out


def model(m, e, t):
    mean, scale = _l(m.mean), _l(m.scale)
    z = [(v - mu) / s for v, mu, s in zip(e, mean, scale)] if m.standardize else list(e)
    te = timestep_embedding(t, m.temb_dim)
    te = [silu(v) for v in linear(te, _l(m.temb_in.weight), _l(m.temb_in.bias))]
    te = linear(te, _l(m.temb_out.weight), _l(m.temb_out.bias))
    for p in m.blocks:
        z = block(p, z, te)
    head = unit(z, m.final_norm, m.final_linear)
    z = [a + b for a, b in zip(z, head)]
    return [v * s + mu for v, s, mu in zip(z, scale, mean)] if m.standardize else z


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def brute_force_metrics(scores, labels, c_miss=1.0, c_fa=1.0, p_target=0.05):
    """Exhaustive sweep over every midpoint between distinct scores and both ends.

    Returns ``(eer, eer_cut, min_dcf, dcf_cut)`` where a cut ``k`` means
    "accept the scores >= the k-th smallest distinct score" (k = len means
    reject all).
    """
    distinct = sorted(set(scores))
    cuts = [distinct[0] - 1.0]
    cuts += [(a + b) / 2 for a, b in zip(distinct, distinct[1:])]
    cuts += [distinct[-1] + 1.0]
    n_t = sum(1 for l in labels if l)
    n_n = len(labels) - n_t
    best_eer = None
    best_dcf = None
    norm = min(c_miss * p_target, c_fa * (1 - p_target))
    for k, th in enumerate(cuts):
        fa = 0
        miss = 0
        for s, l in zip(scores, labels):
            if l and s < th:
                miss += 1
            if not l and s >= th:
                fa += 1
        far, frr = fa / n_n, miss / n_t
        gap = abs(far - frr)
        if best_eer is None or gap < best_eer[0]:
            best_eer = (gap, (far + frr) / 2, k)
        dcf = c_miss * p_target * frr + c_fa * (1 - p_target) * far
        if best_dcf is None or dcf < best_dcf[0]:
            best_dcf = (dcf, k)
    return best_eer[1], best_eer[2], best_dcf[0] / norm, best_dcf[1]
