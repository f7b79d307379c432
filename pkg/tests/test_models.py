import math
import numpy as np
import pytest
from subrate.block import CoeffBlock
from subrate.config import GradientDescentSettings
from subrate.failures import DatasetFailure, NumericalFailure, UsageFailure
from subrate.features import FeatureVector, extract, extract_batch
from subrate.models import *
from subrate.models import MagnitudeHistogram, predict_histogram, logistic_mse, loads_model, dumps_model, fit_logistic_histogram
from subrate.synth import SynthConfig, generate, oracle_rates


TRUE = SubBlockLinearParams(2.0, 1.5, 0.5, 3.0, 7.0)


def synth_blocks(n=200, seed=1, sizes=((4, 4), (8, 8), (16, 16))):
    return [r.block for r in generate(SynthConfig(n_blocks=n, seed=seed, size_set=sizes, magnitude_scale=3.0))]


def linear_mse(params, X, y):
    return float(np.mean((predict_features(params, X) - y) ** 2))


class TestFeatureMask:
    def test_parse(self):
        assert FeatureMask.parse("SLZE") == FeatureMask.ALL
        assert FeatureMask.parse("s+l") == FeatureMask.S | FeatureMask.L
        assert FeatureMask.parse("Z,E").text == "ZE"
        assert FeatureMask.parse(FeatureMask.L) == FeatureMask.L

    @pytest.mark.parametrize("text", ["", "X", "SLX", "+"])
    def test_parse_invalid(self, text):
        with pytest.raises(UsageFailure):
            FeatureMask.parse(text)

    def test_subsets(self):
        subsets = FeatureMask.subsets()
        assert len(subsets) == 15
        assert len(set(subsets)) == 15
        assert [m.text for m in subsets[:10]] == ["S", "L", "Z", "E", "SL", "SZ", "SE", "LZ", "LE", "ZE"]
        assert [len(m) for m in subsets] == [1] * 4 + [2] * 6 + [3] * 4 + [4]
        assert subsets[-1] == FeatureMask.ALL

    def test_label(self):
        assert FeatureMask.parse("SZE").label == "S+Z+E"
        assert FeatureMask.parse("LE").columns == [1, 3]


class TestModelKind:
    def test_parse(self):
        assert ModelKind.parse("rho") is ModelKind.RHO
        assert ModelKind.parse(ModelKind.LOGISTIC) is ModelKind.LOGISTIC

    def test_parse_invalid(self):
        with pytest.raises(UsageFailure):
            ModelKind.parse("lambda")


class TestParams:
    def test_bias_disabled(self):
        with pytest.raises(UsageFailure):
            SubBlockLinearParams(1, 1, 1, 1, 1, bias_enabled=False)
        with pytest.raises(UsageFailure):
            RhoDomainParams(1.0, 2.0, bias_enabled=False)

    def test_masked_weight(self):
        with pytest.raises(UsageFailure):
            SubBlockLinearParams(1, 1, 0, 0, 0, feature_mask=FeatureMask.S)

    @pytest.mark.parametrize("value", [math.nan, math.inf])
    def test_not_finite(self, value):
        with pytest.raises(NumericalFailure):
            SubBlockLinearParams(value)
        with pytest.raises(NumericalFailure):
            LogisticParams(0, 0, value)


class TestPredict:
    def test_bias_only(self):
        assert predict_subblock(SubBlockLinearParams(e=7.0), FeatureVector(3, 2, 5, 1)) == 7.0

    def test_subblock(self):
        fv = FeatureVector(3, 3.321928, 3, 0.543564)
        assert predict_subblock(TRUE, fv) == pytest.approx(21.113584, abs=1e-6)

    def test_zero_block(self):
        fv = extract(CoeffBlock(8, 8, [0] * 64))
        assert predict_subblock(SubBlockLinearParams(2, 3, 4, 5, 6.5), fv) == 6.5

    def test_rho(self):
        assert predict_rho(RhoDomainParams(1.0, 0.0), FeatureVector(s=12)) == 12
        assert predict_rho(RhoDomainParams(2.0, 3.0), FeatureVector(s=5)) == 13
        assert predict_rho(RhoDomainParams(2.0, 3.0), FeatureVector()) == 3

    def test_batch(self):
        blocks = synth_blocks(20)
        X = extract_batch(blocks)
        expected = [predict_subblock(TRUE, FeatureVector.of(row)) for row in X]
        np.testing.assert_allclose(predict_features(TRUE, X), expected, rtol=1e-12)

    def test_logistic_magnitudes(self):
        b = CoeffBlock(4, 4, [3, -2, 0, 1] * 4)
        assert predict_logistic(LogisticParams(1.0, 0.0, 0.3, 0.1, 0.0), b) == pytest.approx(24.0)

    def test_logistic_zero_block(self):
        p = LogisticParams(0.7, 2.0, 1.3, 0.4, 5.0)
        expected = 16 * 2.0 / (1 + math.exp(-0.4)) + 5.0
        assert predict_logistic(p, CoeffBlock(4, 4, [0] * 16)) == pytest.approx(expected, rel=1e-12)

    def test_logistic_steep(self):
        b = CoeffBlock(4, 4, [4, -1, 2] + [0] * 13)
        assert predict_logistic(LogisticParams(0.0, 1.0, 100.0, 0.0, 0.0), b) == pytest.approx(3 + 13 * 0.5, abs=1e-9)


class TestMagnitudeHistogram:
    def test_counts(self):
        hist = MagnitudeHistogram.from_blocks([CoeffBlock(4, 4, [2, -2, 0, 5] + [0] * 12), CoeffBlock(4, 4, [1] * 16)])
        assert hist.n == 2
        assert hist.magnitude_sums.tolist() == [9.0, 16.0]
        assert hist.positions.tolist() == [16.0, 16.0]
        assert list(zip(hist.block_index, hist.magnitude, hist.count)) == [(0, 0.0, 13.0), (0, 2.0, 2.0), (0, 5.0, 1.0), (1, 1.0, 16.0)]

    def test_take(self):
        blocks = synth_blocks(30)
        hist = MagnitudeHistogram.from_blocks(blocks)
        p = LogisticParams(0.4, 1.2, 0.8, -0.3, 2.0)
        indexes = [7, 3, 20, 11]
        np.testing.assert_allclose(
            predict_histogram(p, hist.take(indexes)),
            predict_histogram(p, MagnitudeHistogram.from_blocks([blocks[i] for i in indexes])),
            rtol=1e-12,
        )


class TestFitLinear:
    def test_recover(self):
        X = extract_batch(synth_blocks(1000))
        y = predict_features(TRUE, X)
        params, report = fit_linear(X, y)
        np.testing.assert_allclose(params.vector(), TRUE.vector(), atol=1e-6)
        assert report.iterations == 0
        assert report.final_mse < 1e-9

    def test_feature_vectors(self):
        blocks = synth_blocks(50)
        fvs = [extract(b) for b in blocks]
        y = [predict_subblock(TRUE, fv) for fv in fvs]
        params, _ = fit_linear(fvs, y)
        np.testing.assert_allclose(params.vector(), TRUE.vector(), atol=1e-6)

    def test_rho(self):
        X = extract_batch(synth_blocks(100))
        y = 3 * X[:, 0] + 1
        params, _ = fit_linear(X, y, "S", kind=ModelKind.RHO)
        assert isinstance(params, RhoDomainParams)
        assert (params.alpha, params.beta) == (pytest.approx(3.0, abs=1e-9), pytest.approx(1.0, abs=1e-9))

    def test_rho_mask(self):
        with pytest.raises(UsageFailure):
            fit_linear(np.ones((3, 4)), [1, 2, 3], "SL", kind=ModelKind.RHO)

    def test_constant(self):
        X = extract_batch(synth_blocks(60))
        params, _ = fit_linear(X, np.full(60, 42.0))
        np.testing.assert_allclose(params.weights, 0.0, atol=1e-9)
        assert params.e == pytest.approx(42.0, abs=1e-9)

    def test_mask(self):
        X = extract_batch(synth_blocks(60))
        params, _ = fit_linear(X, predict_features(TRUE, X), "SE", bias=False)
        assert params.b == 0.0 and params.c == 0.0 and params.e == 0.0
        assert params.feature_mask == FeatureMask.S | FeatureMask.E

    def test_rank_deficient(self):
        X = np.array([[1.0, 1.0, 0.0, 0.0], [2.0, 2.0, 0.0, 0.0], [3.0, 3.0, 0.0, 0.0]])
        params, report = fit_linear(X, [2.0, 4.0, 6.0], "SL", bias=False)
        assert params.a == pytest.approx(1.0) and params.b == pytest.approx(1.0)
        assert report.final_mse == pytest.approx(0.0, abs=1e-20)

    def test_empty(self):
        with pytest.raises(DatasetFailure):
            fit_linear(np.zeros((0, 4)), [])

    def test_mismatch(self):
        with pytest.raises(DatasetFailure):
            fit_linear(np.ones((3, 4)), [1.0, 2.0])

    def test_not_finite(self):
        X = np.ones((3, 4))
        X[1, 2] = np.nan
        with pytest.raises(NumericalFailure):
            fit_linear(X, [1.0, 2.0, 3.0])
        with pytest.raises(NumericalFailure):
            fit_linear(np.ones((2, 4)), [1.0, math.inf])

    def test_optimality(self):
        rng = np.random.default_rng(5)
        for seed in range(10):
            blocks = synth_blocks(80, seed=seed)
            X = extract_batch(blocks)
            y = oracle_rates(blocks) + rng.normal(0, 2, size=80).clip(-5, 5) + 5
            params, report = fit_linear(X, y)
            best = linear_mse(params, X, y)
            assert best == pytest.approx(report.final_mse, rel=1e-9)
            v = params.vector()
            for _ in range(100):
                w = v * (1 + 1e-2 * rng.standard_normal(5))
                assert best <= linear_mse(SubBlockLinearParams(*w), X, y) * (1 + 1e-12)

    def test_nested(self):
        blocks = synth_blocks(400, seed=9)
        X = extract_batch(blocks)
        y = oracle_rates(blocks).astype(float)
        mse = {m: fit_linear(X, y, m, bias=False)[1].final_mse for m in FeatureMask.subsets()}
        for small in mse:
            for large in mse:
                if small != large and (small & large) == small:
                    assert mse[large] <= mse[small] + 1e-9 * max(1.0, mse[small])

    def test_deterministic(self):
        X = extract_batch(synth_blocks(100))
        y = oracle_rates(synth_blocks(100)).astype(float)
        assert fit_linear(X, y)[0] == fit_linear(X, y)[0]


class TestGradient:
    def test_finite_differences(self):
        rng = np.random.default_rng(17)
        for draw in range(20):
            blocks = synth_blocks(12, seed=100 + draw, sizes=((4, 4), (8, 4)))
            rates = rng.uniform(5, 60, size=12)
            p = LogisticParams(*rng.uniform([-1, -2, -1, -1, -5], [1, 2, 1, 1, 5]))
            analytic = analytic_gradient(p, blocks, rates)
            numeric = np.zeros(5)
            for i in range(5):
                h = 1e-5
                up, down = p.vector(), p.vector()
                up[i] += h
                down[i] -= h
                numeric[i] = (logistic_mse(LogisticParams.of(up), blocks, rates) - logistic_mse(LogisticParams.of(down), blocks, rates)) / (2 * h)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6 * np.abs(numeric).max())

    def test_perfect_fit(self):
        blocks = synth_blocks(10)
        p = LogisticParams(0.3, 1.5, 0.7, -0.2, 4.0)
        rates = [predict_logistic(p, b) for b in blocks]
        np.testing.assert_allclose(analytic_gradient(p, blocks, rates), 0.0, atol=1e-9)

    def test_epsilon(self):
        blocks = synth_blocks(10)
        rates = np.arange(10, dtype=float) * 3
        p = LogisticParams(0.3, 1.5, 0.7, -0.2, 4.0)
        residual = np.array([predict_logistic(p, b) for b in blocks]) - rates
        assert analytic_gradient(p, blocks, rates)[4] == pytest.approx(2 / 10 * residual.sum(), rel=1e-10)


class TestFitLogistic:
    settings = GradientDescentSettings(max_iterations=50_000)

    def test_linear_data(self):
        blocks = synth_blocks(40, sizes=((4, 4), (8, 8)))
        rates = [predict_logistic(LogisticParams(0.8, 0.0, 1.0, 0.0, 3.0), b) for b in blocks]
        params, report = fit_logistic(blocks, rates, self.settings)
        assert report.final_mse <= 1e-6
        assert logistic_mse(params, blocks, rates) <= 1e-6

    def test_single_sample(self):
        blocks = [CoeffBlock(4, 4, [3, -1, 0, 2] + [0] * 12)]
        params, report = fit_logistic(blocks, [21.0], self.settings)
        assert report.final_mse <= 1e-9
        assert predict_logistic(params, blocks[0]) == pytest.approx(21.0, abs=1e-4)

    def test_descent(self):
        blocks = synth_blocks(60)
        rates = oracle_rates(blocks)
        params, report = fit_logistic(blocks, rates, GradientDescentSettings(max_iterations=2000))
        assert report.final_mse <= report.initial_mse
        assert all(b <= a for a, b in zip(report.history, report.history[1:]))
        assert report.history[0] == report.initial_mse
        assert report.final_mse == pytest.approx(logistic_mse(params, blocks, rates), rel=1e-9)
        assert report.initial_mse == pytest.approx(logistic_mse(LogisticParams.of(GradientDescentSettings().init), blocks, rates), rel=1e-9)

    def test_fixed_step(self):
        blocks = synth_blocks(30)
        rates = oracle_rates(blocks)
        _, report = fit_logistic(blocks, rates, GradientDescentSettings(step_growth=1.0, momentum=0.0, max_iterations=300))
        assert report.iterations <= 300
        assert report.final_mse <= report.initial_mse

    def test_deterministic(self):
        blocks = synth_blocks(30)
        rates = oracle_rates(blocks)
        settings = GradientDescentSettings(max_iterations=500)
        assert fit_logistic(blocks, rates, settings) == fit_logistic(blocks, rates, settings)

    def test_empty(self):
        with pytest.raises(DatasetFailure):
            fit_logistic([], [])

    def test_not_finite(self):
        blocks = synth_blocks(5)
        with pytest.raises(NumericalFailure) as e:
            fit_logistic(blocks, oracle_rates(blocks), GradientDescentSettings(init=(1e300, 1e300, 1.0, 0.0, 0.0)))
        assert e.value.iteration == 0

    def test_histogram(self):
        blocks = synth_blocks(30)
        rates = oracle_rates(blocks).astype(float)
        settings = GradientDescentSettings(max_iterations=300)
        assert fit_logistic_histogram(MagnitudeHistogram.from_blocks(blocks), rates, settings) == fit_logistic(blocks, rates, settings)


class TestModelFile:
    @pytest.mark.parametrize("model", [
        SubBlockLinearParams(0.1 + 0.2, 1 / 3, math.pi, -1e-17, 7.000000000000001),
        SubBlockLinearParams(2.5, 0.0, 0.0, 1 / 7, 0.0, bias_enabled=False, feature_mask=FeatureMask.parse("SE")),
        RhoDomainParams(3.141592653589793, -2.718281828459045),
        LogisticParams(0.5, 1.0 / 3.0, 1e-300, -0.0, 12345.678901234567),
    ])
    def test_round_trip(self, model):
        original = ModelFile(model, (22, 37), 1234, 0.1 + 0.7)
        restored = loads_model(dumps_model(original))
        assert restored == original
        assert restored.model.vector().tobytes() == model.vector().tobytes()

    def test_save_load(self, tmp_path):
        original = ModelFile(TRUE, (27,), 10, 1.5)
        save_model(original, tmp_path / "model.json")
        assert load_model(tmp_path / "model.json") == original

    def test_document(self):
        doc = ModelFile(TRUE, (22,), 5, 0.25).to_dict()
        assert doc["model_kind"] == "subblock"
        assert doc["params"] == dict(a=2.0, b=1.5, c=0.5, d=3.0, e=7.0)
        assert doc["bias_enabled"] is True
        assert doc["feature_mask"] == "SLZE"
        assert doc["training"] == dict(qp_train=[22], n_samples=5, final_mse=0.25)

    @pytest.mark.parametrize("text", [
        "{",
        "[]",
        '{"model_kind": "lambda", "params": {}}',
        '{"model_kind": "rho"}',
        '{"format_version": 9}',
        '{"model_kind": "rho", "params": {"alpha": 1.0, "beta": 3.0}, "bias_enabled": false}',
        '{"model_kind": "subblock", "params": {"a": 1.0, "e": 3.0}, "bias_enabled": false}',
        '{"model_kind": "subblock", "params": {"a": NaN}}',
        '{"model_kind": "subblock", "params": {"b": 1.0}, "feature_mask": "SX"}',
    ])
    def test_malformed(self, text):
        with pytest.raises(DatasetFailure) as e:
            loads_model(text)
        assert e.value.exit_code == 2

    def test_missing(self, tmp_path):
        with pytest.raises(DatasetFailure):
            load_model(tmp_path / "absent.json")
