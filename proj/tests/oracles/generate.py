"""Independent reference values for the unit tests (numpy/scipy only).

Run: python3 tests/oracles/generate.py
The printed numbers are frozen into tests/unit/*.cpp.
"""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

# default trilinear law
VK = [0.0, 5.0, 9.0]
def f(v):
    if v <= 5.0:
        return v
    if v <= 9.0:
        return 5.0 - 0.75 * (v - 5.0)
    return 2.0 + 0.5 * (v - 9.0)


def laplacian(n, edges):
    w = np.zeros((n, n))
    for i, j, c in edges:
        w[i, j] -= c
        w[j, i] -= c
        w[i, i] += c
        w[j, j] += c
    return w


print("# six-node net eigenvalues")
edges6 = [(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 4, 1.5), (4, 5, 0.25), (5, 0, 3.0), (1, 4, 0.75)]
w6 = laplacian(6, edges6)
print(np.linalg.eigvalsh(w6).tolist())

print("# two-node relaxation v0 = (2, 4), C = 1")
sol = solve_ivp(lambda t, v: [f(v[1]) - f(v[0]), f(v[0]) - f(v[1])], (0, 1.0), [2.0, 4.0],
                rtol=1e-12, atol=1e-12)
print("v(1) =", sol.y[:, -1].tolist())

print("# snap-through: reservoir 6 Pa, C = 1, chamber from v = 1")
sol = solve_ivp(lambda t, v: [6.0 - f(v[0])], (0, 6.0), [1.0], rtol=1e-12, atol=1e-12,
                dense_output=True)
print("v(1), v(3), v(6) =", [float(sol.sol(t)[0]) for t in (1.0, 3.0, 6.0)])
t_snap = brentq(lambda t: sol.sol(t)[0] - 9.0, 1.0, 6.0)
print("time to reach v_min =", t_snap)

print("# closed two-node equilibria by grid + bisection")
for V in (6.0, 14.0, 20.0):
    g = lambda x: f(x) - f(V - x)
    xs = np.linspace(0.0, V, 200001)
    gs = np.array([g(x) for x in xs])
    roots = []
    for k in range(len(xs) - 1):
        if gs[k] == 0.0:
            roots.append(xs[k])
        elif gs[k] * gs[k + 1] < 0.0:
            roots.append(brentq(g, xs[k], xs[k + 1], xtol=1e-14))
    if gs[-1] == 0.0:
        roots.append(xs[-1])
    roots = sorted(set(round(r, 9) for r in roots))
    print(V, roots)

print("# mixed boundary instance")
edges5 = [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 4, 1.0), (0, 2, 0.3), (1, 3, 1.2), (2, 4, 0.7)]
w5 = laplacian(5, edges5)
clamped = {0: 8.0, 4: 0.0}
inject = {2: 0.5}
free = [1, 2, 3]
q = np.zeros(5)
for k, r in inject.items():
    q[k] = r
pc = np.array([clamped[0], clamped[4]])
a = w5[np.ix_(free, free)]
b = w5[np.ix_(free, [0, 4])]
pf = np.linalg.solve(a, q[free] - b @ pc)
p = np.zeros(5)
p[free] = pf
p[0], p[4] = pc
print("p =", p.tolist())
print("reservoir flux =", (w5 @ p)[[0, 4]].tolist())

print("# flux-bc pseudoinverse, three-node chain C = (1, 2), q = (1, 0, -1)")
w3 = laplacian(3, [(0, 1, 1.0), (1, 2, 2.0)])
print(np.linalg.pinv(w3) @ np.array([1.0, 0.0, -1.0]))

print("# reduced Hessian eigenvalues")
def slope(v):
    return 1.0 if v <= 5.0 else (-0.75 if v < 9.0 else 0.5)
for vol in ([7, 3, 3, 3, 3, 3], [7, 3], [7, 12, 3]):
    s = [slope(x) for x in vol]
    n = len(vol)
    h = np.diag(s[:-1]) + s[-1] * np.ones((n - 1, n - 1))
    print(vol, np.linalg.eigvalsh(h).tolist())
