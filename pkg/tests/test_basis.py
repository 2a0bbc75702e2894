import numpy as np
import pytest

from vmsd.basis import ShapeSet, gauss_rule, lobatto_nodes, shape_tables, tensor_eval
from vmsd.errors import DomainError, InvalidConfigError


def test_gauss_rule_small_cases():
    r1 = gauss_rule(1)
    assert np.allclose(r1.nodes, [0.0])
    assert np.allclose(r1.weights, [2.0])
    r2 = gauss_rule(2)
    assert np.allclose(sorted(r2.nodes), [-1 / np.sqrt(3), 1 / np.sqrt(3)])
    assert np.allclose(r2.weights, [1.0, 1.0])


def test_gauss_rule_rejects_empty():
    with pytest.raises(InvalidConfigError):
        gauss_rule(0)


def test_gauss_rule_monomial_exactness():
    # n nodes integrate x^k exactly for k <= 2n-1
    for n in range(1, 8):
        rule = gauss_rule(n)
        for k in range(2 * n):
            exact = 2.0 / (k + 1) if k % 2 == 0 else 0.0
            approx = np.sum(rule.weights * rule.nodes**k)
            assert abs(approx - exact) <= 1e-12 * max(1.0, abs(exact))


def test_gauss_rule_degree_eight_oracle():
    # int_{-1}^{1} x^8 dx = 2/9
    rule = gauss_rule(5)
    assert abs(np.sum(rule.weights * rule.nodes**8) - 2.0 / 9.0) < 1e-14


def test_weights_sum_to_interval_length():
    for n in range(1, 7):
        assert abs(np.sum(gauss_rule(n).weights) - 2.0) < 1e-14


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_partition_of_unity_and_kronecker(p):
    shapes = ShapeSet(p)
    pts = np.linspace(-1, 1, 23)
    vals, ders = shapes.eval(pts)
    assert np.allclose(vals.sum(axis=0), 1.0, atol=1e-13)
    assert np.allclose(ders.sum(axis=0), 0.0, atol=1e-12)
    at_nodes, _ = shapes.eval(shapes.nodes)
    assert np.allclose(at_nodes, np.eye(p + 1), atol=1e-14)


def test_linear_shape_values_at_end():
    vals, _ = ShapeSet(1).eval([-1.0])
    assert np.allclose(vals[:, 0], [1.0, 0.0])


def test_quadratic_matches_lagrange_formula():
    # independent evaluation via the textbook product formula
    shapes = ShapeSet(2)
    xi = 0.3
    nodes = shapes.nodes
    expected = []
    for i in range(3):
        val = 1.0
        for j in range(3):
            if j != i:
                val *= (xi - nodes[j]) / (nodes[i] - nodes[j])
        expected.append(val)
    vals, _ = shapes.eval([xi])
    assert np.allclose(vals[:, 0], expected, atol=1e-13)


def test_lobatto_nodes_contain_endpoints():
    for p in (1, 2, 3, 4):
        nodes = lobatto_nodes(p)
        assert nodes[0] == -1.0 and nodes[-1] == 1.0
        assert np.all(np.diff(nodes) > 0)
    with pytest.raises(InvalidConfigError):
        lobatto_nodes(5)


def test_shape_tables_cached_and_consistent():
    val, der, qn, qw = shape_tables(2, 4)
    assert val.shape == (3, 4)
    rule = gauss_rule(4)
    assert np.array_equal(qn, rule.nodes)


def test_tensor_eval_constant_combination():
    bounds = [(0.0, 2.0), (-1.0, 1.0)]
    total = 0.0
    grad = np.zeros(2)
    for i in range(2):
        for j in range(2):
            v, g = tensor_eval(bounds, (1, 1), (i, j), (0.7, 0.3))
            total += v
            grad += g
    assert abs(total - 1.0) < 1e-13
    assert np.allclose(grad, 0.0, atol=1e-13)


def test_tensor_eval_reproduces_linear():
    # nodal coefficients of f(x) = x0 give exact value and gradient
    bounds = [(0.0, 2.0), (0.0, 1.0)]
    point = (1.3, 0.4)
    val = 0.0
    grad = np.zeros(2)
    nodes0 = [0.0, 2.0]
    for i in range(2):
        for j in range(2):
            v, g = tensor_eval(bounds, (1, 1), (i, j), point)
            val += nodes0[i] * v
            grad += nodes0[i] * g
    assert abs(val - 1.3) < 1e-13
    assert np.allclose(grad, [1.0, 0.0], atol=1e-12)


def test_tensor_eval_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    bounds = [(0.0, 1.0), (0.0, 0.5), (-1.0, 1.0)]
    degrees = (2, 2, 2)
    coeffs = rng.standard_normal((3, 3, 3))
    point = np.array([0.37, 0.21, 0.11])

    def field(x):
        out = 0.0
        for idx in np.ndindex(3, 3, 3):
            v, _ = tensor_eval(bounds, degrees, idx, x)
            out += coeffs[idx] * v
        return out

    grad = np.zeros(3)
    for idx in np.ndindex(3, 3, 3):
        _, g = tensor_eval(bounds, degrees, idx, point)
        grad += coeffs[idx] * g
    eps = 1e-5
    for d in range(3):
        shift = np.zeros(3)
        shift[d] = eps
        fd = (field(point + shift) - field(point - shift)) / (2 * eps)
        assert abs(fd - grad[d]) <= 1e-6 * max(1.0, abs(grad[d]))


def test_tensor_eval_outside_cell_raises():
    with pytest.raises(DomainError):
        tensor_eval([(0.0, 1.0)], (1,), (0,), (1.5,))
