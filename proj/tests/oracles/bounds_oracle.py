#!/usr/bin/env python3
"""High-precision reference values for the bound evaluators and planners.

Every formula is evaluated independently of the C++ code at 50
significant digits with mpmath. The C++ tests freeze the printed numbers;
rerun this script to regenerate them:

    python3 tests/oracles/bounds_oracle.py
"""
import mpmath as mp

mp.mp.dps = 50


def M_mu(L, a, mu, d):
    return L * d ** ((1 - a) / 2) / (mu ** (1 - a) * (1 + a) ** (1 - a))


def M_delta(L, a, delta):
    return (1 / delta) ** ((1 - a) / (1 + a)) * L ** (2 / (1 + a))


def sigma2(L, a, m, mu, d):
    return 4 * d ** (a - 1) * mu ** (2 * a) * L**2 + 4 * mu**2 * m**2


def beta(L, a, m, mu, d):
    return L * mu ** (1 + a) * d ** ((1 + a) / 2) / (mp.sqrt(2) * (1 + a)) + m * mu**2 * d / 2


def bv_const(lam, Mm, d):
    return 8 / lam * mp.sqrt(mp.mpf(3) / 2 + d / 2 * mp.log(2 * Mm / lam))


def bias(lam, Mm, d, b):
    return bv_const(lam, Mm, d) * (b + mp.sqrt(b / 2))


def shrink(eta, limit):
    while not eta < limit:
        eta = eta / 2
    return eta


def plan_w2(eps, d, L, a, m, lam, w0):
    e = mp.mpf(eps)
    mu = (e ** (2 / (1 + a)) * min(lam ** (2 / (1 + a)), 1) /
          (300 * mp.sqrt(d) * (mp.sqrt(m) + L ** (1 / (1 + a))) *
           mp.sqrt(10 + d * mp.log(e**-2 * (m + L) * d / lam))))
    eta = e**2 * mu ** (1 - a) * lam / (1000 * (L + m) * d ** ((3 - a) / 2))
    M = M_mu(L, a, mu, d)
    eta = shrink(eta, 2 / (M + m + lam))
    K = max(1, int(mp.ceil(mp.log(3 * w0 / e) / (lam * eta))))
    b = beta(L, a, m, mu, d)
    return dict(mu=mu, eta=eta, K=K, M=M, sigma2=sigma2(L, a, m, mu, d), beta=b,
                C=bv_const(lam, M + m, d), bias=bias(lam, M + m, d, b))


def plan_tv(eps, d, L, a, m, lam, xs, w0):
    e = mp.mpf(eps)
    mu = min(e ** (1 / (1 + a)) / (4 * max(1, L ** (1 / (1 + a))) * mp.sqrt(d)),
             mp.sqrt(e * lam / (2 * m**2 * d)))
    M = M_mu(L, a, mu, d)
    eb = e**2 / (4 * max((M + m) * (mp.sqrt(2 * d / lam + 2 * xs**2) + 2 * xs**2), 1))
    eta = eb**2 * lam / (64 * d * (M + m))
    eta = shrink(eta, 2 / (M + m + lam))
    K = max(1, int(mp.ceil(mp.log(2 * w0 / eb) / (lam * eta))))
    b = beta(L, a, m, mu, d)
    return dict(mu=mu, eps_bar=eb, eta=eta, K=K, M=M, sigma2=sigma2(L, a, m, mu, d),
                beta=b, C=bv_const(lam, M + m, d), bias=bias(lam, M + m, d, b))


def reg_lambda(eps1, m4, dist):
    return 4 * mp.mpf(eps1) / (mp.sqrt(m4) + mp.mpf(dist) ** 2)


def plan_reg(eps1, m4, dist, d, L, a, m_extra, xs, w0):
    lam = reg_lambda(eps1, m4, dist)
    out = plan_tv(mp.mpf(eps1) / 2, d, L, a, m_extra + lam, lam, xs, w0)
    out["lambda_reg"] = lam
    return out


def plan_det_w2(eps, d, L, a, m, lam, w0):
    e = mp.mpf(eps)
    a = mp.mpf(a)
    delta = (lam * e / (24 * L ** (1 / (1 + a)))) ** ((1 + a) / a)
    M = M_delta(L, a, delta)
    A = (24 / (lam * e)) ** ((1 - a) / a) * L ** (1 / a)
    eta = min(min(lam, lam**2) * e**2 / (90000 * d) / (A + m), 1 / (2 * lam),
              lam / (36 * (M + m)))
    eta = shrink(eta, 1 / (2 * lam))
    K = max(1, int(mp.ceil(720000 * d / (min(1, lam) * e**2 * lam**2) * (A + m) *
                           mp.log(w0 / e))))
    return dict(delta=delta, M=M, eta=eta, K=K)


def plan_det_tv(eps, d, L, a, m, lam, b):
    e = mp.mpf(eps)
    a = mp.mpf(a)
    delta = mp.mpf(1)
    for _ in range(1000):
        M = M_delta(L, a, delta)
        g = (lam * e**2 / (8 * d * mp.log((M + m) / lam) * L ** (2 / (1 + a)))) ** ((1 + a) / (2 * a))
        nxt = min(g, 1)
        if abs(nxt - delta) <= mp.mpf(10) ** -40 * delta:
            delta = nxt
            break
        delta = nxt
    M = M_delta(L, a, delta)
    lg = mp.log((M + m) / lam)
    eta = min(1, 1 / (2 * b * (M + m)), lam * e**2 / (32 * d**2 * (M + m) ** 2 * lg))
    eta = shrink(eta, 1 / (2 * (M + m)))
    K = int(mp.ceil(max(b, d / (4 * eta * lam) * lg + delta / (4 * eta * lam))))
    return dict(delta=delta, M=M, eta=eta, K=K)


def show(tag, res):
    print(tag)
    for k, v in res.items():
        if isinstance(v, int):
            print(f"  {k} = {v}")
        else:
            print(f"  {k} = {mp.nstr(v, 17)}")


if __name__ == "__main__":
    # single evaluators
    print("smooth_approx_M(2,0.5,0.01) =", mp.nstr(M_delta(2, mp.mpf(0.5), mp.mpf("0.01")), 17))
    print("Mmu(1,0.5,0.1,100) =", mp.nstr(M_mu(1, mp.mpf(0.5), mp.mpf("0.1"), 100), 17))
    print("beta(2,0,1,0.1,1) =", mp.nstr(beta(2, 0, 1, mp.mpf("0.1"), 1), 17))
    print("beta(1,1,1,0.5,4) =", mp.nstr(beta(1, 1, 1, mp.mpf("0.5"), 4), 17))
    print("bias(lam=1,M+m=2,d=1,beta=0.125) =", mp.nstr(bias(1, 2, 1, mp.mpf("0.125")), 17))
    rec = 1 + mp.sqrt(2 * 2 * mp.mpf("0.1") * 1 / 1)
    print("recursion(M=2,lam=1,eta=.1,d=1,s2=0,K=0,W=1) =", mp.nstr(rec, 17))
    print("recursion sigma term(s2=.04,eta=.1) =",
          mp.nstr(mp.sqrt(mp.mpf("0.04")) * mp.sqrt((1 + mp.mpf("0.1")) * mp.mpf("0.1")), 17))
    kl = (mp.sqrt(2) / 2 + mp.sqrt(4 + 2 * mp.mpf("0.01")) / 2) * mp.mpf("0.1")
    print("kl(M=1,lam=1,d=1,x=0,W=.1) =", mp.nstr(kl, 17))
    e = mp.mpf("0.1")
    print("disc(M+m=1,lam=1,d=1,eta=.1) =", mp.nstr(mp.sqrt(8 * e**4 + 4 * e**3), 17))

    show("plan_w2 A (0.5,d2,L1,a0,m1,l1,W2)", plan_w2(mp.mpf("0.5"), 2, 1, 0, 1, 1, 2))
    show("plan_w2 B (0.1,d10,L2,a.5,m2,l.5,W5)",
         plan_w2(mp.mpf("0.1"), 10, 2, mp.mpf("0.5"), 2, mp.mpf("0.5"), 5))
    show("plan_w2 C (0.8,d1,L1,a1,m1,l1,W3)", plan_w2(mp.mpf("0.8"), 1, 1, 1, 1, 1, 3))

    show("plan_tv A (0.5,d1,L2,a0,m1,l1,x0,W2)", plan_tv(mp.mpf("0.5"), 1, 2, 0, 1, 1, 0, 2))
    show("plan_tv B (1,d1,L1,a.5,m1,l1,x0,W1)", plan_tv(1, 1, 1, mp.mpf("0.5"), 1, 1, 0, 1))
    show("plan_tv C (0.2,d5,L1,a.5,m2,l.5,x1.3,W4)",
         plan_tv(mp.mpf("0.2"), 5, 1, mp.mpf("0.5"), 2, mp.mpf("0.5"), mp.mpf("1.3"), 4))

    print("reg_lambda(0.1,4,0) =", mp.nstr(reg_lambda("0.1", 4, 0), 17))
    print("reg_lambda(0.1,4,sqrt2) =", mp.nstr(reg_lambda("0.1", 4, mp.sqrt(2)), 17))
    print("reg_lambda(0.5,9,1) =", mp.nstr(reg_lambda("0.5", 9, 1), 17))
    show("plan_reg A (0.5,m4=9,dist=1,d2,L1,a.5,mextra0,x0,W2)",
         plan_reg("0.5", 9, 1, 2, 1, mp.mpf("0.5"), 0, 0, 2))
    show("plan_reg B (0.8,m4=16,dist=.5,d3,L2,a0,mextra1,x.4,W3)",
         plan_reg("0.8", 16, mp.mpf("0.5"), 3, 2, 0, 1, mp.mpf("0.4"), 3))
    show("plan_reg C (0.3,m4=4,dist=2,d1,L1,a1,mextra.5,x0,W1)",
         plan_reg("0.3", 4, 2, 1, 1, 1, mp.mpf("0.5"), 0, 1))

    show("plan_det_w2 A (0.5,d2,L1,a.5,m1,l1,W2)",
         plan_det_w2(mp.mpf("0.5"), 2, 1, mp.mpf("0.5"), 1, 1, 2))
    show("plan_det_w2 B (0.3,d3,L3,a1,m2,l2,W1)", plan_det_w2(mp.mpf("0.3"), 3, 3, 1, 2, 2, 1))
    show("plan_det_w2 C (0.5,d1,L1,a.25,m1,l.5,W4)",
         plan_det_w2(mp.mpf("0.5"), 1, 1, mp.mpf("0.25"), 1, mp.mpf("0.5"), 4))

    show("plan_det_tv A (0.5,d1,L1,a1,m1,l1,b1)", plan_det_tv(mp.mpf("0.5"), 1, 1, 1, 1, 1, 1))
    show("plan_det_tv B (0.3,d2,L2,a.5,m1,l.5,b2)",
         plan_det_tv(mp.mpf("0.3"), 2, 2, mp.mpf("0.5"), 1, mp.mpf("0.5"), 2))
    show("plan_det_tv C (0.8,d3,L1,a.25,m2,l1,b1)",
         plan_det_tv(mp.mpf("0.8"), 3, 1, mp.mpf("0.25"), 2, 1, 1))
