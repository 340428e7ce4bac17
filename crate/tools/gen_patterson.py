"""Generate nested Gauss-Patterson rules on [-1, 1] at high precision.

Each extension adds n+1 nodes to an n-node rule: the roots of the degree n+1
polynomial E orthogonal to all polynomials of degree <= n under the weight
P_n(x) dx, where P_n is the node polynomial of the current rule. Weights are
interpolatory. Output is a Rust source fragment with 1, 3, 7, 15, 31, 63
point rules (weights normalized to sum 2).
"""
import mpmath as mp

mp.mp.dps = 120
LEVELS = 6


def integrate_monomial(k):
    return mp.mpf(0) if k % 2 else mp.mpf(2) / (k + 1)


def poly_mul(a, b):
    out = [mp.mpf(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def poly_eval(c, x):
    acc = mp.mpf(0)
    for coef in reversed(c):
        acc = acc * x + coef
    return acc


def extend(nodes):
    n = len(nodes)
    node_poly = [mp.mpf(1)]
    for x in nodes:
        node_poly = poly_mul(node_poly, [-x, mp.mpf(1)])
    # moments of the weight P_n(x): m_k = int P_n(x) x^k dx
    def moment(k):
        return mp.fsum(c * integrate_monomial(i + k) for i, c in enumerate(node_poly))
    deg = n + 1
    # monic E = x^deg + sum_{i<deg} e_i x^i ; int P_n E x^j = 0, j = 0..n
    a = mp.matrix(deg, deg)
    rhs = mp.matrix(deg, 1)
    for j in range(deg):
        for i in range(deg):
            a[j, i] = moment(i + j)
        rhs[j] = -moment(deg + j)
    e = mp.lu_solve(a, rhs)
    e_poly = [e[i] for i in range(deg)] + [mp.mpf(1)]
    edges = [mp.mpf(-1)] + sorted(nodes) + [mp.mpf(1)]
    new = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        new.append(mp.findroot(lambda x: poly_eval(e_poly, x), (lo, hi), solver="anderson"))
    return sorted(nodes + new)


def weights(nodes):
    n = len(nodes)
    a = mp.matrix(n, n)
    rhs = mp.matrix(n, 1)
    for j in range(n):
        for i, x in enumerate(nodes):
            a[j, i] = x ** j
        rhs[j] = integrate_monomial(j)
    w = mp.lu_solve(a, rhs)
    return [w[i] for i in range(n)]


def main():
    rules = [[mp.mpf(0)]]
    g3 = mp.sqrt(mp.mpf(3) / 5)
    rules.append([-g3, mp.mpf(0), g3])
    while len(rules) < LEVELS:
        rules.append(extend(rules[-1]))
    for nodes in rules:
        w = weights(nodes)
        print(f"// {len(nodes)} points")
        print("&[")
        for x, wi in zip(nodes, w):
            xs = mp.nstr(x, 20, min_fixed=-1, max_fixed=1) if x != 0 else "0.0"
            print(f"    ({xs}, {mp.nstr(wi, 20)}),")
        print("],")


if __name__ == "__main__":
    main()
