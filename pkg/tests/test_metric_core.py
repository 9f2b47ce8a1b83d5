import numpy as np
import pytest

from wtree import (
    Distribution,
    NegativeEntryError,
    NonSquareError,
    NonzeroDiagonalError,
    ParseError,
    PointCloud,
    SemimetricMatrix,
    TrainSample,
    ValidationError,
    ZeroExactError,
    euclidean_matrix,
    mean_relative_error,
    read_distributions_csv,
    read_matrix_csv,
    read_points_csv,
    read_samples_jsonl,
    validate_semimetric,
    write_distributions_csv,
    write_matrix_csv,
    write_points_csv,
    write_samples_jsonl,
)


def rand_semimetric(n, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    d = rng.uniform(0.1, 10.0, (n, n))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


class TestValidateSemimetric:
    def test_accepts_valid(self):
        m = validate_semimetric(rand_semimetric(6, 0))
        assert m.n == 6
        assert not m.d.flags.writeable

    def test_rejects_non_square(self):
        with pytest.raises(NonSquareError):
            validate_semimetric(np.ones((3, 4)))

    def test_rejects_negative(self):
        d = rand_semimetric(4, 1)
        d[0, 1] = d[1, 0] = -1.0
        with pytest.raises(NegativeEntryError):
            validate_semimetric(d)

    def test_rejects_nonzero_diagonal(self):
        d = rand_semimetric(4, 2)
        d[2, 2] = 1e-6
        with pytest.raises(NonzeroDiagonalError):
            validate_semimetric(d)

    def test_rejects_non_finite(self):
        d = rand_semimetric(4, 3)
        d[0, 1] = np.inf
        with pytest.raises(ValidationError):
            validate_semimetric(d)

    def test_repairs_tiny_asymmetry(self):
        d = rand_semimetric(5, 4)
        d[0, 1] += 5e-10
        m = validate_semimetric(d)
        assert np.allclose(m.d, m.d.T)


class TestDistribution:
    def test_renormalizes_within_tolerance(self):
        p = np.full(4, 0.25)
        p[0] += 5e-10
        dist = Distribution(p)
        assert dist.p.sum() == pytest.approx(1.0, abs=1e-15)

    def test_rejects_large_mass_deviation(self):
        with pytest.raises(ValidationError):
            Distribution(np.full(4, 0.3))

    def test_rejects_negative_mass(self):
        with pytest.raises(NegativeEntryError):
            Distribution(np.array([1.2, -0.2]))


def test_train_sample_rejects_negative_w1():
    with pytest.raises(ValidationError):
        TrainSample(0, 1, -0.5)


def test_euclidean_matrix_matches_norms():
    rng = np.random.Generator(np.random.Philox(7))
    pc = PointCloud(rng.standard_normal((8, 3)))
    m = euclidean_matrix(pc)
    for i in range(8):
        for j in range(8):
            expect = np.linalg.norm(pc.coords[i] - pc.coords[j])
            assert m.d[i, j] == pytest.approx(expect, abs=1e-12)


class TestMeanRelativeError:
    def test_exact_match_is_zero(self):
        mean, std = mean_relative_error([1.0, 2.0], [1.0, 2.0])
        assert mean == 0.0 and std == 0.0

    def test_known_value(self):
        mean, std = mean_relative_error([1.1, 1.8], [1.0, 2.0])
        assert mean == pytest.approx(0.1, abs=1e-12)
        assert std == pytest.approx(0.0, abs=1e-12)

    def test_rejects_zero_exact(self):
        with pytest.raises(ZeroExactError):
            mean_relative_error([1.0], [0.0])


class TestFileRoundTrips:
    def test_matrix(self, tmp_path):
        m = validate_semimetric(rand_semimetric(7, 10))
        path = tmp_path / "m.csv"
        write_matrix_csv(path, m)
        back = read_matrix_csv(path)
        assert np.array_equal(back.d, m.d)

    def test_points(self, tmp_path):
        rng = np.random.Generator(np.random.Philox(11))
        pc = PointCloud(rng.standard_normal((5, 4)))
        path = tmp_path / "p.csv"
        write_points_csv(path, pc)
        back = read_points_csv(path)
        assert np.array_equal(back.coords, pc.coords)

    def test_distributions(self, tmp_path):
        rng = np.random.Generator(np.random.Philox(12))
        dists = [Distribution(p / p.sum()) for p in rng.uniform(0.1, 1, (3, 6))]
        path = tmp_path / "d.csv"
        write_distributions_csv(path, dists)
        back = read_distributions_csv(path, n=6)
        # the constructor renormalizes, so allow one ulp of drift
        for a, b in zip(back, dists):
            assert np.allclose(a.p, b.p, rtol=0, atol=1e-15)

    def test_samples(self, tmp_path):
        samples = [TrainSample(0, 1, 2.5), TrainSample(3, 2, 0.125)]
        path = tmp_path / "s.jsonl"
        write_samples_jsonl(path, samples)
        assert read_samples_jsonl(path) == samples


class TestParseErrors:
    def test_matrix_bad_cell_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1\n1,oops\n")
        with pytest.raises(ParseError) as exc:
            read_matrix_csv(path)
        assert exc.value.line == 2
        assert exc.value.column == 2

    def test_matrix_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("0,1\n1,0,3\n")
        with pytest.raises(ParseError):
            read_matrix_csv(path)

    def test_points_bad_header(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("hello\n")
        with pytest.raises(ParseError) as exc:
            read_points_csv(path)
        assert exc.value.line == 1

    def test_samples_bad_record(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text('{"mu": 0}\n')
        with pytest.raises(ParseError):
            read_samples_jsonl(path)
