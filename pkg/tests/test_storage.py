"""
Tests for result tables, index-set files and sample files.
"""
import math

import numpy as np
import pytest

from app.core.domains import draw_uniform_samples
from app.core.errors import ConfigError, ParameterError
from app.core.indexsets import custom_index_set, hyperbolic_cross_set
from app.core.schemas import ConvergenceRow, DomainKind, DomainSpec
from app.core.storage import (
    ResultStore,
    read_index_set,
    read_json,
    read_samples,
    read_table,
    write_index_set,
    write_samples,
)
from app.core.utils import config_hash


class TestResultStore:
    """CSV tables with config metadata lines."""

    def setup_method(self):
        self.config = {"experiment": "converge", "seed": 7, "domain": {"kind": "l_shape"}}
        self.rows = [
            ConvergenceRow(schedule_index=i, M=10 * (i + 1), N=i + 1, n=i, rule="linear(c=5)",
                           l2_error=10.0 ** -i, linf_error=float("nan") if i == 2 else 1.0,
                           coefficient_norm=1.0, trials_ok=3, trials_failed=0, flagged=False,
                           trial=-1, seed=7, config_hash="abc")
            for i in range(3)
        ]

    def test_table_layout(self, tmp_path):
        store = ResultStore(tmp_path)
        path = store.write_table("table.csv", self.rows, self.config)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# config={")
        assert lines[1] == f"# config_hash={config_hash(self.config)}"
        assert lines[2].split(",")[:3] == ["schedule_index", "M", "N"]
        assert "1.000000000000e-01" in lines[4]
        assert lines[5].split(",")[6] == "nan"

    def test_table_read_back(self, tmp_path):
        path = ResultStore(tmp_path).write_table("table.csv", self.rows, self.config)
        config, frame = read_table(path)
        assert config == self.config
        assert list(frame["M"]) == [10, 20, 30]
        assert frame["l2_error"].iloc[2] == pytest.approx(0.01)
        assert math.isnan(frame["linf_error"].iloc[2])

    def test_identical_inputs_give_identical_bytes(self, tmp_path):
        a = ResultStore(tmp_path / "a").write_table("t.csv", self.rows, self.config)
        b = ResultStore(tmp_path / "b").write_table("t.csv", self.rows, self.config)
        assert a.read_bytes() == b.read_bytes()

    def test_missing_metadata(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_table(path)

    def test_json_artifact(self, tmp_path):
        path = ResultStore(tmp_path).write_json("fit.json", {"coefficients": np.array([1.0, 2.0])})
        assert '"coefficients"' in path.read_text(encoding="utf-8")

    def test_json_read_back(self, tmp_path):
        payload = {"seed": 7, "singular_values": np.array([2.0, 0.5]), "c_upsilon_lambda": float("inf")}
        loaded = read_json(ResultStore(tmp_path).write_json("fit.json", payload))
        assert loaded["seed"] == 7
        assert loaded["singular_values"] == [2.0, 0.5]
        assert math.isinf(loaded["c_upsilon_lambda"])


class TestIndexSetFiles:
    """Plain-text index-set format."""

    def test_round_trip(self, tmp_path):
        lam = hyperbolic_cross_set(6, 3)
        path = write_index_set(lam, tmp_path / "hc.txt")
        assert path.read_text(encoding="utf-8").splitlines()[0] == "dim=3 kind=hyperbolic_cross n=6"
        loaded = read_index_set(path)
        assert loaded.as_tuples() == lam.as_tuples()
        assert loaded.degree == 6

    def test_custom_set(self, tmp_path):
        lam = custom_index_set([(2, 0), (0, 0), (0, 1)])
        loaded = read_index_set(write_index_set(lam, tmp_path / "c.txt"))
        assert loaded.as_tuples() == [(0, 0), (0, 1), (2, 0)]
        assert loaded.degree is None

    def test_bad_row(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("dim=2 kind=custom n=\n0 0\n1 0 0\n", encoding="utf-8")
        with pytest.raises(ParameterError):
            read_index_set(path)


class TestSampleFiles:
    """CSV sample sets with a provenance header."""

    def test_round_trip(self, tmp_path):
        domain = DomainSpec(kind=DomainKind.L_SHAPE)
        samples = draw_uniform_samples(domain, 40, seed=3)
        path = write_samples(samples, tmp_path / "y.csv")
        assert path.read_text(encoding="utf-8").startswith("# domain=l_shape d=2 measure=uniform seed=3 M=40")
        loaded = read_samples(path)
        np.testing.assert_array_equal(loaded.points, samples.points)
        assert loaded.seed == 3
        assert loaded.proposals == 40

    def test_domain_mismatch(self, tmp_path):
        samples = draw_uniform_samples(DomainSpec(kind=DomainKind.L_SHAPE), 5, seed=1)
        path = write_samples(samples, tmp_path / "y.csv")
        with pytest.raises(ParameterError):
            read_samples(path, DomainSpec(kind=DomainKind.FULL_BOX))
