import io
import logging

import numpy as np
import pytest

from cznd import problem
from cznd.errors import DimensionError, ParseError, ProblemFormatError
from cznd.linalg import CMatrix
from cznd.models import flatten_state
from cznd.problem import TimeMatrix, build_wr_br, load_problem, uniqueness, uniqueness_det, uniqueness_eigen

from conftest import constant_problem, crandn

TVP_2x2 = """\
dims 2 2
[F]
1 ; 0
0 ; 0
0 ; 0
1 ; 0
[A]
0 ; 0
0 ; 0
0 ; 0
0 ; 0
[C]
t ; 1
2 ; 0
3 ; 0
4 ; -t
"""


class TestExample3:
    def test_f_at_zero(self, ex3):
        np.testing.assert_array_equal(ex3.F.value(0.0), np.array([[6, 1], [1, 4]]) + 1j * np.eye(2))

    def test_c_at_zero(self, ex3):
        expected = np.array([[2, 2], [-4, -2]]) + 1j * np.array([[2, 6], [-8, -2]])
        np.testing.assert_allclose(ex3.C.value(0.0), expected, atol=1e-15)

    def test_exact_solution_at_zero_by_hand(self, ex3):
        x = ex3.exact.value(0.0)
        lhs = x @ ex3.F.value(0.0) - ex3.A.value(0.0) @ np.conj(x)
        np.testing.assert_allclose(lhs, [[2 + 2j, 2 + 6j], [-4 - 8j, -2 - 2j]], atol=1e-15)

    def test_exact_residual_random_tau(self, ex3, rng):
        for tau in rng.uniform(0, 10, 100):
            r = ex3.residual_matrix(tau, ex3.exact.value(tau))
            assert np.linalg.norm(r) <= 1e-10

    def test_conjugated_equation_same_solution(self, ex3, rng):
        for tau in rng.uniform(0, 10, 50):
            x = ex3.exact.value(tau)
            r = np.conj(x) @ np.conj(ex3.F.value(tau)) - np.conj(ex3.A.value(tau)) @ x - np.conj(ex3.C.value(tau))
            assert np.linalg.norm(r) <= 1e-10

    @pytest.mark.parametrize("name", ["F", "A", "C", "exact"])
    def test_derivatives_match_finite_differences(self, ex3, rng, name):
        tm = getattr(ex3, name)
        h = 1e-5
        for tau in rng.uniform(0, 10, 50):
            fd = (tm.value(tau + h) - tm.value(tau - h)) / (2 * h)
            d = tm.derivative(tau)
            assert np.all(np.abs(d - fd) <= 1e-5 * (1 + np.abs(d)))

    def test_dimensions(self, ex3):
        assert (ex3.m, ex3.n, ex3.dim) == (2, 2, 8)
        assert isinstance(ex3.F.eval_at(0.0), CMatrix)


class TestEmbedding:
    def test_top_left_block(self, ex3):
        w = build_wr_br(ex3, 0.0).w
        np.testing.assert_array_equal(w.re[:4, :4], [[5, 0, 1, 0], [0, 5, 0, 1], [1, 0, 3, 0], [0, 1, 0, 3]])
        assert w.is_real

    def test_exact_state_solves_embedding(self, ex3):
        x_star = flatten_state(ex3.exact.value(0.0))
        np.testing.assert_allclose(x_star, [0, -1, 1, 0, 0, -1, 1, 0], atol=1e-15)
        emb = build_wr_br(ex3, 0.0)
        assert np.linalg.norm(emb.w.re @ x_star - emb.b) <= 1e-12

    def test_decoupled_problem_is_identity(self):
        c = np.array([[1.0, 2.0], [3.0, 4.0]])
        p = constant_problem(np.eye(2), np.zeros((2, 2)), c)
        emb = build_wr_br(p, 0.0)
        np.testing.assert_array_equal(emb.w.re, np.eye(8))
        np.testing.assert_array_equal(np.linalg.solve(emb.w.re, emb.b), flatten_state(c))

    def test_equivalence_of_formulations(self, ex3, rng):
        for tau in rng.uniform(0, 10, 200):
            x = crandn(rng, 2, 2)
            emb = build_wr_br(ex3, tau)
            lhs = flatten_state(ex3.residual_matrix(tau, x))
            rhs = emb.w.re @ flatten_state(x) - emb.b
            assert np.linalg.norm(lhs - rhs) <= 1e-10 * (1 + np.linalg.norm(emb.b))

    def test_derivative_blocks(self, ex3, rng):
        h = 1e-5
        for tau in rng.uniform(0, 10, 20):
            emb = build_wr_br(ex3, tau)
            fd_w = (build_wr_br(ex3, tau + h).w.re - build_wr_br(ex3, tau - h).w.re) / (2 * h)
            fd_b = (build_wr_br(ex3, tau + h).b - build_wr_br(ex3, tau - h).b) / (2 * h)
            np.testing.assert_allclose(emb.w_dot.re, fd_w, atol=1e-8)
            np.testing.assert_allclose(emb.b_dot, fd_b, atol=1e-8)


class TestUniqueness:
    def test_gap_at_zero(self, ex3):
        rep = uniqueness_eigen(ex3, [0.0])
        assert rep.min_eigen_gap == pytest.approx(28 - np.sqrt(200) - 2, rel=1e-10)
        assert rep.min_eigen_gap == pytest.approx(11.858, abs=1e-3)

    def test_example3_grid(self, ex3):
        rep = uniqueness(ex3, np.linspace(0, 10, 1001))
        assert rep.min_eigen_gap > 1
        assert rep.min_abs_det > 0
        assert rep.det_sign_changes == 0
        assert rep.unique

    def test_identical_spectra(self):
        a = np.array([[2.0, 1.0], [0.0, 3.0]])
        rep = uniqueness_eigen(constant_problem(a, a, np.zeros((2, 2))), [0.0, 1.0])
        assert rep.min_eigen_gap == pytest.approx(0.0, abs=1e-12)
        assert not rep.unique

    def test_zero_coefficients_singular(self):
        z = np.zeros((2, 2))
        rep = uniqueness_det(constant_problem(z, z, z), [0.0])
        assert rep.min_abs_det == 0.0
        assert not rep.unique

    def test_decoupled_det_is_one(self):
        rep = uniqueness_det(constant_problem(np.eye(2), np.zeros((2, 2)), np.ones((2, 2))), [0.0])
        assert rep.min_abs_det == pytest.approx(1.0, rel=1e-14)
        assert rep.unique

    def test_single_point_warns(self, ex3, caplog):
        with caplog.at_level(logging.WARNING):
            rep = uniqueness(ex3, [2.0])
        assert rep.unique
        assert "single point" in caplog.text

    def test_empty_grid(self, ex3):
        with pytest.raises(ValueError):
            uniqueness(ex3, [])

    def test_unique_requires_both(self, ex3):
        rep = uniqueness(ex3, np.linspace(0, 1, 5), eps_det=1e9)
        assert rep.min_eigen_gap > rep.eps_eig
        assert not rep.unique


class TestProblemFiles:
    def test_shipped_file_matches_builtin(self, ex3, rng):
        p = load_problem(str(problem.example3_path()))
        for tau in rng.uniform(0, 10, 100):
            for name in ("F", "A", "C", "exact"):
                a, b = getattr(p, name), getattr(ex3, name)
                np.testing.assert_allclose(a.value(tau), b.value(tau), rtol=1e-13, atol=1e-13)
                np.testing.assert_allclose(a.derivative(tau), b.derivative(tau), rtol=1e-12, atol=1e-12)

    def test_loads_text(self):
        p = problem.loads(TVP_2x2)
        assert p.exact is None
        np.testing.assert_array_equal(p.C.value(2.0), [[2 + 1j, 2], [3, 4 - 2j]])
        np.testing.assert_array_equal(p.C.derivative(2.0), [[1, 0], [0, -1j]])

    def test_file_object(self):
        assert problem.load_problem(io.StringIO(TVP_2x2)).m == 2

    def test_comments_and_blank_lines(self):
        text = "# header\n" + TVP_2x2.replace("[A]", "\n[A]  # coupling\n")
        assert problem.loads(text).n == 2

    def test_dumps_roundtrip(self, rng):
        text = problem.dumps(load_problem(str(problem.example3_path())))
        back = problem.loads(text)
        orig = load_problem(str(problem.example3_path()))
        for tau in rng.uniform(0, 10, 10):
            np.testing.assert_array_equal(back.C.value(tau), orig.C.value(tau))

    def test_dumps_rejects_closures(self, ex3):
        with pytest.raises(ValueError):
            problem.dumps(ex3)

    def test_c_dimension_mismatch_names_c(self):
        text = TVP_2x2 + "5 ; 0\n6 ; 0\n"
        with pytest.raises(DimensionError, match=r"\[C\]"):
            problem.loads(text)

    def test_c_three_by_two_names_c(self):
        c = TimeMatrix.constant(np.ones((3, 2)))
        f = TimeMatrix.constant(np.eye(2))
        with pytest.raises(DimensionError, match="C"):
            problem.TvsscmeProblem(2, 2, f, f, c)

    def test_parse_error_coordinates(self):
        text = TVP_2x2.replace("3 ; 0", "3 ; sin(")
        with pytest.raises(ParseError) as info:
            problem.loads(text)
        err = info.value
        assert (err.section, err.row, err.col) == ("C", 2, 1)
        assert "[C]" in str(err) and "row 2" in str(err) and "col 1" in str(err)

    def test_missing_section(self):
        with pytest.raises(ProblemFormatError):
            problem.loads(TVP_2x2.split("[C]")[0])

    def test_missing_header(self):
        with pytest.raises(ProblemFormatError):
            problem.loads(TVP_2x2.replace("dims 2 2\n", ""))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_problem(str(tmp_path / "nope.tvp"))
