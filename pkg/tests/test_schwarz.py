import numpy as np
import pytest

from dgschwarz.basis import DofMap, PolySpace, eval_basis
from dgschwarz.forms import PenaltyConfig, assemble_ah, interpolate
from dgschwarz.mesh import SubdomainSpec, build_hierarchy
from dgschwarz.schwarz import build_coarse_injection, build_preconditioner, condition_number_of_P

COND = PenaltyConfig(10, 10, "degree-scaled", "diameter")


def setup(fine_n=4, coarse_n=2, p=3, q=2, kind="total", spec=None, **space_kwargs):
    hier = build_hierarchy(fine_n, coarse_n, spec or SubdomainSpec())
    fine = DofMap(hier.fine, PolySpace(p, kind, **space_kwargs))
    coarse = DofMap(hier.coarse, PolySpace(q, kind))
    A = assemble_ah(fine, COND)
    return hier, fine, coarse, A


def test_coarse_injection_reproduces_linear():
    hier, fine, coarse, _ = setup(fine_n=4, coarse_n=1, q=1, spec=SubdomainSpec(splits=1))
    inj = build_coarse_injection(fine, coarse)
    # coarse function x on the single coarse element via its L2 projection
    v = interpolate(coarse, lambda x, y: x + 0 * y)
    u = inj.prolong(v, fine.ndofs)
    g = np.linspace(0.02, 0.98, 5)
    pts = np.array([(a, b) for a in g for b in g])
    assert np.abs(fine.evaluate(u, pts) - pts[:, 0]).max() <= 1e-12


def test_injection_exact_on_random_coarse_functions():
    hier, fine, coarse, _ = setup(fine_n=6, coarse_n=3, p=4, q=3, spec=SubdomainSpec(splits=3))
    inj = build_coarse_injection(fine, coarse)
    v = np.random.default_rng(0).standard_normal(coarse.ndofs)
    u = inj.prolong(v, fine.ndofs)
    pts = np.random.default_rng(1).uniform(0, 1, (40, 2))
    assert np.abs(fine.evaluate(u, pts) - coarse.evaluate(v, pts)).max() <= 1e-10


def test_injected_function_continuous_inside_coarse_elements():
    hier, fine, coarse, _ = setup(fine_n=4, coarse_n=2, p=3, q=3)
    inj = build_coarse_injection(fine, coarse)
    u = inj.prolong(np.random.default_rng(2).standard_normal(coarse.ndofs), fine.ndofs)
    mesh = hier.fine
    for f in mesh.faces:
        if f.is_boundary or hier.parent[f.ext_element] != hier.parent[f.int_element]:
            continue
        (x0, y0), (x1, y1) = f.endpoints
        for t in (0.1, 0.5, 0.9):
            pt = (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
            sides = []
            for e in (f.ext_element, f.int_element):
                dofs = fine.element_dofs(e)
                b = mesh.element_bounds(e)
                sides.append([u[dofs] @ eval_basis(fine.space, b, pt, k).reshape(fine.space.dim, -1)
                              for k in (0, 1)])
            assert np.allclose(sides[0][0], sides[1][0], atol=1e-12)
            assert np.allclose(sides[0][1], sides[1][1], atol=1e-10)


def test_coarse_energy_identity():
    hier, fine, coarse, A = setup()
    B = build_preconditioner(A, hier, fine, coarse)
    inj = B.injections[0]
    v = np.random.default_rng(3).standard_normal(coarse.ndofs)
    Iv = inj.prolong(v, fine.ndofs)
    e1 = Iv @ (A @ Iv)
    e2 = v @ (B.local_matrices[0] @ v)
    assert abs(e1 - e2) <= 1e-12 * abs(e1)


def test_subdomain_energy_equality():
    hier, fine, coarse, A = setup()
    B = build_preconditioner(A, hier, fine, coarse)
    rng = np.random.default_rng(4)
    for inj, Ai in zip(B.injections[1:], B.local_matrices[1:]):
        v = rng.standard_normal(inj.local_dim)
        Iv = inj.prolong(v, fine.ndofs)
        assert np.isclose(Iv @ (A @ Iv), v @ (Ai @ v), rtol=1e-12)


def test_coarse_space_must_be_nested():
    hier = build_hierarchy(4, 2)
    fine = DofMap(hier.fine, PolySpace(2, "total"))
    coarse = DofMap(hier.coarse, PolySpace(2, "partial"))
    with pytest.raises(ValueError):
        build_coarse_injection(fine, coarse)


def test_single_subdomain_is_exact():
    hier, fine, _, A = setup()
    B = build_preconditioner(A, None, fine)
    kappa, lo, hi = condition_number_of_P(A, B, method="dense")
    assert abs(kappa - 1) <= 1e-6
    x = np.random.default_rng(5).standard_normal(fine.ndofs)
    assert np.allclose(B.preconditioned(x), x)


@pytest.mark.parametrize("spec", [SubdomainSpec("nonoverlapping"), SubdomainSpec("overlapping", 0.25)])
def test_projection_idempotent(spec):
    hier, fine, coarse, A = setup(fine_n=8, coarse_n=2, p=2, q=2, spec=spec)
    B = build_preconditioner(A, hier, fine, coarse)
    x = np.random.default_rng(6).standard_normal(fine.ndofs)
    for i in range(len(B.injections)):
        Px = B.projection(i, x)
        assert np.linalg.norm(B.projection(i, Px) - Px) <= 1e-8 * np.linalg.norm(x)


@pytest.mark.parametrize("spec", [SubdomainSpec("nonoverlapping"), SubdomainSpec("overlapping", 0.25)])
def test_spectrum_bounds(spec):
    hier, fine, coarse, A = setup(fine_n=8, coarse_n=2, p=2, q=2, spec=spec)
    B = build_preconditioner(A, hier, fine, coarse)
    kappa, lo, hi = condition_number_of_P(A, B, method="dense")
    assert lo > 0
    # N_c + 2 for the quadrant partition
    assert hi <= 5 * 1.01


def test_lanczos_agrees_with_dense():
    hier, fine, coarse, A = setup(fine_n=4, coarse_n=2, p=4, q=2)
    B = build_preconditioner(A, hier, fine, coarse)
    dense = condition_number_of_P(A, B, method="dense")
    lanczos = condition_number_of_P(A, B, method="lanczos", tol=1e-10)
    assert np.allclose(dense, lanczos, rtol=1e-6)


def test_condition_number_basis_invariant():
    dim = PolySpace(4).dim
    rng = np.random.default_rng(7)
    perm = tuple(int(i) for i in rng.permutation(dim))
    signs = tuple(int(s) for s in rng.choice([-1, 1], dim))
    ref = None
    for kwargs in ({}, {"permutation": perm}, {"signs": signs}, {"permutation": perm, "signs": signs}):
        hier, fine, coarse, A = setup(p=4, q=2, **kwargs)
        kappa = condition_number_of_P(A, build_preconditioner(A, hier, fine, coarse), method="dense")[0]
        ref = ref or kappa
        assert abs(kappa / ref - 1) <= 1e-6


def test_apply_on_block_input():
    hier, fine, coarse, A = setup()
    B = build_preconditioner(A, hier, fine, coarse)
    X = np.random.default_rng(8).standard_normal((fine.ndofs, 3))
    Y = B.apply(X)
    for k in range(3):
        assert np.allclose(Y[:, k], B.apply(X[:, k]))
    # B is symmetric
    assert np.isclose(X[:, 0] @ Y[:, 1], X[:, 1] @ Y[:, 0])


def test_unknown_eigen_method():
    hier, fine, coarse, A = setup()
    with pytest.raises(ValueError):
        condition_number_of_P(A, build_preconditioner(A, hier, fine, coarse), method="qr")
