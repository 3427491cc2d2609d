import numpy as np
import pytest

from esr.cascade import (
    ESRModel,
    StageRegressor,
    TestParams,
    TrainingTrace,
    TrainParams,
    apply_stage_regressor,
    combine_multiple_results,
    initialize,
    learn_stage_regressor,
    predict,
    run_cascade,
    stage_increments,
    train,
    update_shapes,
)
from esr.features import extract_shape_indexed_pixels, generate_local_coordinates, pixel_difference_features
from esr.fern import Fern, bin_index, compute_bin_outputs
from esr.geometry import bounding_box, compute_mean_shape, normalize_targets_batch, place_in_box

SMALL = dict(n_aug=4, t_stages=3, k_ferns=15, p_pixels=30, f_features=4, beta=10.0, seed=11)


@pytest.fixture(scope="module")
def trained(small_synthetic):
    (images, shapes, boxes), _ = small_synthetic
    trace = TrainingTrace()
    model = train(images, shapes, TrainParams(**SMALL), boxes=boxes, trace=trace)
    return model, trace


class TestParamsValidation:
    @pytest.mark.parametrize("field", ["n_aug", "k_ferns", "p_pixels", "f_features"])
    def test_counts_positive(self, field):
        with pytest.raises(ValueError):
            TrainParams(**{field: 0})

    def test_feature_cap(self):
        with pytest.raises(ValueError):
            TrainParams(f_features=17)

    def test_defaults(self):
        p = TrainParams()
        assert (p.t_stages, p.k_ferns, p.f_features, p.n_aug, p.p_pixels, p.beta) == (10, 500, 5, 20, 400, 1000.0)
        assert TestParams().n_init == 5
        with pytest.raises(ValueError):
            TestParams(0)


class TestInitialize:
    def test_single_exemplar(self, small_synthetic):
        (images, shapes, _), _ = small_synthetic
        init = initialize(images[:3], 1, shapes[:1], np.random.default_rng(0), shapes=shapes[:3])
        for i in range(3):
            assert bounding_box(init.initial[i]) == pytest.approx(bounding_box(shapes[i]))
            np.testing.assert_allclose(init.initial[i], place_in_box(shapes[0], bounding_box(shapes[i])))

    def test_triples_grouped_by_sample(self, small_synthetic):
        (images, shapes, boxes), _ = small_synthetic
        c = 7
        init = initialize(images[:c], 20, shapes, np.random.default_rng(0), shapes=shapes[:c], boxes=boxes[:c])
        assert len(init.initial) == 20 * c
        np.testing.assert_array_equal(init.image_index, np.repeat(np.arange(c), 20))
        for k in range(c):
            np.testing.assert_array_equal(init.ground_truth[20 * k:20 * (k + 1)],
                                          np.broadcast_to(shapes[k], (20,) + shapes[k].shape))

    def test_without_replacement_when_possible(self, rng):
        exemplars = rng.uniform(0, 10, size=(20, 3, 2))
        img = np.zeros((16, 16))
        init = initialize([img], 20, exemplars, np.random.default_rng(1), boxes=[(0, 0, 10, 10)])
        keys = {tuple(np.round(s.ravel(), 9)) for s in init.initial}
        assert len(keys) == 20

    def test_deterministic(self, small_synthetic):
        (images, shapes, _), _ = small_synthetic
        a = initialize(images, 3, shapes, np.random.default_rng(5), shapes=shapes)
        b = initialize(images, 3, shapes, np.random.default_rng(5), shapes=shapes)
        np.testing.assert_array_equal(a.initial, b.initial)

    def test_empty_init_set(self, small_synthetic):
        (images, _, _), _ = small_synthetic
        with pytest.raises(ValueError):
            initialize(images, 2, np.zeros((0, 3, 2)), np.random.default_rng(0))


def _stage_inputs(small_synthetic):
    (images, shapes, boxes), _ = small_synthetic
    rng = np.random.default_rng(0)
    init = initialize(images, 2, shapes, rng, shapes=shapes, boxes=boxes)
    mean = compute_mean_shape(shapes)
    targets = normalize_targets_batch(init.ground_truth, init.initial, mean)
    return images, init, mean, targets


class TestLearnStage:
    def test_zero_targets_give_no_ferns(self, small_synthetic):
        images, init, mean, targets = _stage_inputs(small_synthetic)
        stage = learn_stage_regressor(np.zeros_like(targets), images, init.initial, mean,
                                      TrainParams(**SMALL), np.random.default_rng(0), init.image_index)
        assert stage.ferns == ()
        assert len(stage.coords) == SMALL["p_pixels"]

    def test_single_fern_residual(self, small_synthetic):
        images, init, mean, targets = _stage_inputs(small_synthetic)
        params = TrainParams(**{**SMALL, "k_ferns": 1})
        stage = learn_stage_regressor(targets, images, init.initial, mean, params,
                                      np.random.default_rng(0), init.image_index)
        rho = extract_shape_indexed_pixels(images, init.initial, stage.coords, mean, init.image_index)
        fern = stage.ferns[0]
        pred = fern.predict(pixel_difference_features(rho, fern.pairs))
        residual = targets - pred
        # the single fern output is the shrunken mean of each bin's targets
        bins = bin_index(pixel_difference_features(rho, fern.pairs), fern.thresholds)
        np.testing.assert_array_equal(fern.bin_outputs, compute_bin_outputs(targets, bins, 16, params.beta))
        assert np.sum(residual ** 2) <= np.sum(targets ** 2)

    def test_replay_reproduces_every_fern(self, small_synthetic):
        images, init, mean, targets = _stage_inputs(small_synthetic)
        params = TrainParams(**SMALL)
        stage = learn_stage_regressor(targets, images, init.initial, mean, params,
                                      np.random.default_rng(3), init.image_index)
        assert len(stage.ferns) == params.k_ferns
        rho = extract_shape_indexed_pixels(images, init.initial, stage.coords, mean, init.image_index)
        residual = targets.copy()
        sse = [np.sum(residual ** 2)]
        for fern in stage.ferns:
            feats = pixel_difference_features(rho, fern.pairs)
            assert np.all(np.abs(fern.thresholds) <= 0.2 * np.abs(feats).max())
            bins = bin_index(feats, fern.thresholds)
            np.testing.assert_array_equal(fern.bin_outputs, compute_bin_outputs(residual, bins, 16, params.beta))
            residual = residual - fern.bin_outputs[bins]
            sse.append(np.sum(residual ** 2))
        assert all(b <= a for a, b in zip(sse, sse[1:]))


class TestApplyStage:
    def test_zero_ferns(self, small_synthetic):
        (images, shapes, _), _ = small_synthetic
        mean = compute_mean_shape(shapes)
        coords = generate_local_coordinates(12, 10, 0.3, np.random.default_rng(0))
        stage = StageRegressor(coords, (Fern(np.zeros((2, 2), int), np.zeros(2), np.zeros((4, 12, 2))),))
        np.testing.assert_array_equal(apply_stage_regressor(images[0], shapes[0], stage, mean), 0.0)

    def test_single_fern_known_bin(self, small_synthetic, rng):
        (images, shapes, _), _ = small_synthetic
        mean = compute_mean_shape(shapes)
        coords = generate_local_coordinates(12, 10, 0.3, rng)
        outputs = rng.normal(size=(4, 12, 2))
        fern = Fern([[0, 1], [2, 3]], [-1e300, -1e300], outputs)
        got = apply_stage_regressor(images[0], shapes[0], StageRegressor(coords, (fern,)), mean)
        np.testing.assert_array_equal(got, outputs[3])

    def test_train_and_test_paths_agree(self, small_synthetic, trained):
        (images, _, _), _ = small_synthetic
        model, trace = trained
        init = trace.initialization
        for i in (0, 17, 101):
            img = images[init.image_index[i]]
            for t, stage in enumerate(model.stages):
                before = trace.stage_shapes[t][i]
                inc = apply_stage_regressor(img, before, stage, model.mean_shape)
                after = update_shapes(before[None], inc[None], model.mean_shape)[0]
                np.testing.assert_array_equal(after, trace.stage_shapes[t + 1][i])


class TestTrain:
    def test_zero_stages_keeps_initial_shapes(self, small_synthetic):
        (images, shapes, boxes), (test_images, _, test_boxes) = small_synthetic
        model = train(images, shapes, TrainParams(**{**SMALL, "t_stages": 0}), boxes=boxes)
        assert model.stages == []
        got = predict(model, test_images, TestParams(1), rng=4, boxes=test_boxes)
        init = initialize(test_images, 1, model.init_set, np.random.default_rng(4), boxes=test_boxes)
        np.testing.assert_array_equal(got, init.initial)

    def test_single_shape_is_its_own_init(self, small_synthetic):
        (images, shapes, _), _ = small_synthetic
        imgs = [images[0], images[0]]
        shp = np.stack([shapes[0], shapes[0]])
        model = train(imgs, shp, TrainParams(**{**SMALL, "t_stages": 2}))
        assert all(s.ferns == () for s in model.stages)
        pred = predict(model, [images[0]], TestParams(3), boxes=[bounding_box(shapes[0])])
        np.testing.assert_allclose(pred[0], shapes[0], atol=1e-9)

    def test_stage_errors_decrease(self, trained):
        _, trace = trained
        errs = trace.stage_errors
        assert len(errs) == SMALL["t_stages"] + 1
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_fern_budget(self, trained):
        model, _ = trained
        assert model.n_ferns == SMALL["t_stages"] * SMALL["k_ferns"]

    def test_residuals_non_increasing_within_stages(self, trained):
        _, trace = trained
        for sse in trace.residual_sse:
            assert all(b <= a for a, b in zip(sse, sse[1:]))

    def test_stage_update_recomputes_bit_identically(self, small_synthetic, trained):
        (images, _, _), _ = small_synthetic
        model, trace = trained
        idx = trace.initialization.image_index
        for t, stage in enumerate(model.stages):
            again = run_cascade([stage], images, trace.stage_shapes[t], model.mean_shape, idx)
            np.testing.assert_array_equal(again, trace.stage_shapes[t + 1])

    def test_span_structure(self, small_synthetic, trained):
        # every applied stage increment is a sum of stored bin outputs
        (images, _, _), _ = small_synthetic
        model, trace = trained
        idx = trace.initialization.image_index
        for t, stage in enumerate(model.stages):
            rho = extract_shape_indexed_pixels(images, trace.stage_shapes[t], stage.coords, model.mean_shape, idx)
            total = np.zeros((len(rho), model.n_fp, 2))
            for fern in stage.ferns:
                b = bin_index(pixel_difference_features(rho, fern.pairs), fern.thresholds)
                total += fern.bin_outputs[b]
            np.testing.assert_array_equal(total, stage_increments(rho, stage.ferns, model.n_fp))

    def test_deterministic(self, small_synthetic, trained):
        (images, shapes, boxes), _ = small_synthetic
        model, _ = trained
        again = train(images, shapes, TrainParams(**SMALL), boxes=boxes)
        for s1, s2 in zip(model.stages, again.stages):
            np.testing.assert_array_equal(s1.coords.offsets, s2.coords.offsets)
            for f1, f2 in zip(s1.ferns, s2.ferns):
                np.testing.assert_array_equal(f1.bin_outputs, f2.bin_outputs)

    def test_needs_two_samples(self, small_synthetic):
        (images, shapes, _), _ = small_synthetic
        with pytest.raises(ValueError):
            train(images[:1], shapes[:1], TrainParams(**SMALL))


class TestPredict:
    def test_zero_model_gives_median_of_initial_shapes(self, small_synthetic):
        (images, shapes, boxes), _ = small_synthetic
        mean = compute_mean_shape(shapes)
        coords = generate_local_coordinates(12, 4, 0.3, np.random.default_rng(0))
        zero = Fern([[0, 1]], [0.0], np.zeros((2, 12, 2)))
        model = ESRModel(mean, [StageRegressor(coords, (zero,))], 12, TrainParams(**SMALL), shapes)
        got = predict(model, images[:2], TestParams(5), rng=9, boxes=boxes[:2])
        init = initialize(images[:2], 5, shapes, np.random.default_rng(9), boxes=boxes[:2])
        for i in range(2):
            np.testing.assert_array_equal(got[i], combine_multiple_results(init.initial[5 * i:5 * i + 5]))

    def test_single_init_is_raw_cascade(self, small_synthetic, trained):
        _, (images, _, boxes) = small_synthetic
        model, _ = trained
        got = predict(model, images, TestParams(1), rng=2, boxes=boxes)
        init = initialize(images, 1, model.init_set, np.random.default_rng(2), boxes=boxes)
        np.testing.assert_array_equal(got, run_cascade(model.stages, images, init.initial, model.mean_shape))

    def test_reduces_error_vs_initialization(self, small_synthetic, trained):
        _, (images, shapes, boxes) = small_synthetic
        model, _ = trained
        pred = predict(model, images, TestParams(5), boxes=boxes)
        init = initialize(images, 1, model.init_set, np.random.default_rng(0), boxes=boxes).initial
        assert np.linalg.norm(pred - shapes) < np.linalg.norm(init - shapes)


class TestCombine:
    def test_identical(self, rng):
        s = rng.normal(size=(4, 2))
        np.testing.assert_array_equal(combine_multiple_results([s, s, s]), s)

    def test_outlier_ignored(self, rng):
        s = rng.normal(size=(4, 2))
        out = combine_multiple_results([s, s + 1e-3, s + 1e6])
        np.testing.assert_array_equal(out, s + 1e-3)

    def test_even_count_lower_median(self, rng):
        stack = rng.normal(size=(6, 5, 2))
        got = combine_multiple_results(stack)
        for i in range(5):
            for j in range(2):
                assert got[i, j] == sorted(stack[:, i, j])[2]

    def test_empty(self):
        with pytest.raises(ValueError):
            combine_multiple_results(np.zeros((0, 3, 2)))
