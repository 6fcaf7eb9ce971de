"""Scratch: independent SE4 piecewise-constant amplitude-matching oracle."""
import numpy as np
import kanetbc as kt
from kanetbc.observables import exterior_current

p = kt.PhysicalParams()
m = kt.DispersionModel(2, p)
unit = p.gamma2_unit
alpha = p.alpha


def modes_at(W):
    # roots of unit*u - alpha*unit^2*u^2 = W, canonical branch
    coeffs = [-alpha * unit**2, unit, -W]  # in u, descending
    u = np.roots(coeffs)
    ks = []
    for uu in u:
        if abs(uu.imag) < 1e-12 * max(1, abs(uu)) and uu.real > 0:
            ks.append(complex(np.sqrt(uu.real)))
        else:
            kk = complex(np.sqrt(complex(uu)))
            if kk.imag < 0:
                kk = -kk
            ks.append(kk)
    ks.sort(key=lambda z: (abs(z.imag) > 1e-12, z.real, z.imag))
    return np.array(ks)


def solve_oracle(edges, v_values, k_inc):
    """edges: interior interface positions x_0=0..x_{N-1}=L; v_values: region potentials (len N+1: leads + interiors)."""
    E = kt.truncated_energy(k_inc, m) - v_values[0]
    n_reg = len(v_values)
    kreg = [modes_at(E + v) for v in v_values]

    # amplitude unknowns: left: r1,r2 (e^{-ik x}); interior regions: 4 each (e^{+ikx},e^{-ikx} per mode, referenced at region left edge);
    # right: t1,t2 (e^{+ik(x-L)})
    n_unknown = 2 + 4 * (n_reg - 2) + 2
    A = np.zeros((n_unknown, n_unknown), dtype=complex)
    b = np.zeros(n_unknown, dtype=complex)

    def col_derivs(lam, x0, x):
        return np.array([lam**n for n in range(4)]) * np.exp(lam * (x - x0))

    rows = 0
    for i, xi in enumerate(edges):
        # state from region i (left of interface) minus region i+1 (right) = 0
        blk = np.zeros((4, n_unknown), dtype=complex)
        rhs = np.zeros(4, dtype=complex)
        # region i side
        if i == 0:
            ks = kreg[0]
            rhs -= col_derivs(1j * k_inc, 0.0, xi)  # incident, moves to rhs with minus later
            for j, kk in enumerate(ks):
                blk[:, j] += col_derivs(-1j * kk, 0.0, xi)
        else:
            ks = kreg[i]
            base = 2 + 4 * (i - 1)
            x0 = edges[i - 1]
            for j, kk in enumerate(ks):
                blk[:, base + 2 * j] += col_derivs(1j * kk, x0, xi)
                blk[:, base + 2 * j + 1] += col_derivs(-1j * kk, x0, xi)
        # region i+1 side (minus)
        if i == len(edges) - 1:
            ks = kreg[-1]
            base = n_unknown - 2
            for j, kk in enumerate(ks):
                blk[:, base + j] -= col_derivs(1j * kk, edges[-1], xi)
        else:
            ks = kreg[i + 1]
            base = 2 + 4 * i
            x0 = xi
            for j, kk in enumerate(ks):
                blk[:, base + 2 * j] -= col_derivs(1j * kk, x0, xi)
                blk[:, base + 2 * j + 1] -= col_derivs(-1j * kk, x0, xi)
        A[rows : rows + 4] = blk
        b[rows : rows + 4] = rhs
        rows += 4

    sol = np.linalg.solve(A, b)  # blk @ u + incident = 0  ->  A u = b with b = -incident
    r = sol[:2]
    t = sol[-2:]
    return E, kreg, r, t


# piecewise-constant double barrier, zero bias (so solver uses expm exact path)
segs = (
    kt.Segment(0, 10, 0.0, 0.0),
    kt.Segment(10, 15, -0.3, 0.0),
    kt.Segment(15, 20, 0.0, 0.0),
    kt.Segment(20, 25, -0.3, 0.0),
    kt.Segment(25, 35, 0.0, 0.0),
)
pot = kt.PiecewisePotential(segs)
edges = [0.0, 10.0, 15.0, 20.0, 25.0, 35.0]
v_values = [0.0, 0.0, -0.3, 0.0, -0.3, 0.0, 0.0]
# note: leads duplicate outer segments; interfaces at 0 and 35 are trivial but keep the structure general

for k_inc in (0.2, 0.6, 1.0, 1.4):
    E, kreg, r, t = solve_oracle(edges, v_values, k_inc)
    prob = kt.build_problem(m, pot, k_inc)
    sol = kt.solve_scattering(prob)
    print("k=%.2f  r diff: %.3e  t diff: %.3e" % (
        k_inc,
        np.max(np.abs(r - sol.reflection_amplitudes)),
        np.max(np.abs(t - sol.transmission_amplitudes)),
    ))
    cp = kt.current_profile(sol)
    print("   T2=%.8f R2=%.8f  T2+R2-1=%.2e   J_t=%.5g" % (cp.t2, cp.r2, cp.t2 + cp.r2 - 1, cp.j_transmitted))
