import numpy as np
import pytest
from dataclasses import replace

from seslab import (
    BorderPolicy,
    ConfigError,
    LayerSpec,
    ShapeError,
    StackSpec,
    build_basis,
    build_stack,
    combine,
    conv2d,
    norm2d,
    scale_matched_residue,
    scale_projection,
    scale_set_from_alpha,
    se_norm,
    se_pool,
    ses_conv_input,
    ses_conv_scalewise,
    single_scale_residue,
    synth_image,
)
from seslab.sesconv import paper_scale_gains

from oracles import combine_loops, norm_twopass_loops


@pytest.fixture(scope="module")
def small_basis():
    return build_basis(scale_set_from_alpha(0.1, 3).scaled(2.0), max_order=2, k=5)


class TestCombine:
    def test_one_hot_selects_basis_member(self, small_basis):
        weights = np.zeros((2, 3, small_basis.num_basis))
        weights[:, :, 4] = 1.0
        bank = combine(weights, small_basis)
        for si in range(3):
            for o in range(2):
                for c in range(3):
                    assert np.array_equal(bank.kernels[si, o, c], small_basis.filters[si, 4])

    def test_zero_weights_zero_kernels(self, small_basis):
        bank = combine(np.zeros((1, 1, small_basis.num_basis)), small_basis)
        assert np.all(bank.kernels == 0.0)

    def test_matches_loop_oracle(self, rng, small_basis):
        weights = rng.standard_normal((2, 2, small_basis.num_basis))
        bank = combine(weights, small_basis)
        ref = combine_loops(weights, small_basis.filters)
        assert np.abs(bank.kernels - ref).max() <= 1e-12

    def test_gains_match_loop_oracle(self, rng, small_basis):
        weights = rng.standard_normal((2, 2, small_basis.num_basis))
        gains = paper_scale_gains(small_basis.sigmas)
        bank = combine(weights, small_basis, scale_gains=gains)
        ref = combine_loops(weights, small_basis.filters, gains)
        assert np.abs(bank.kernels - ref).max() <= 1e-12
        assert bank.gain(2) == 1.0
        assert bank.gain(0) == pytest.approx(1.2)

    def test_linear_in_weights(self, rng, small_basis):
        w1 = rng.standard_normal((2, 1, small_basis.num_basis))
        w2 = rng.standard_normal((2, 1, small_basis.num_basis))
        lhs = combine(0.5 * w1 + 2.0 * w2, small_basis).kernels
        rhs = 0.5 * combine(w1, small_basis).kernels + 2.0 * combine(w2, small_basis).kernels
        assert np.abs(lhs - rhs).max() <= 1e-12

    def test_dimension_mismatch(self, rng, small_basis):
        with pytest.raises(ShapeError, match="basis members"):
            combine(rng.uniform(size=(1, 1, 7)), small_basis)

    def test_gain_count_mismatch(self, rng, small_basis):
        with pytest.raises(ShapeError, match="scale gains"):
            combine(rng.uniform(size=(1, 1, 9)), small_basis, scale_gains=(1.0, 2.0))


class TestSesConvInput:
    def test_single_scale_equals_vanilla(self, rng):
        basis = build_basis(scale_set_from_alpha(0.1, 1).scaled(2.0), 2, 5)
        bank = combine(rng.standard_normal((3, 2, 9)), basis)
        image = rng.uniform(size=(2, 10, 11))
        out = ses_conv_input(image, bank)
        assert out.shape == (1, 3, 10, 11)
        assert np.array_equal(out[0], conv2d(image, bank.kernels[0]))

    def test_odd_members_give_zero_response_on_constant(self, small_basis):
        # members with odd n or odd m have exactly zero DC by parity
        odd_indices = [i for i, (n, m) in enumerate(small_basis.orders) if n % 2 or m % 2]
        weights = np.zeros((1, 1, small_basis.num_basis))
        for i in odd_indices:
            weights[0, 0, i] = 0.7
        bank = combine(weights, small_basis)
        out = ses_conv_input(np.full((1, 12, 12), 3.0), bank)
        interior = out[:, :, 3:-3, 3:-3]
        assert np.abs(interior).max() <= 1e-10

    def test_scale_axis_layout(self, rng, small_basis):
        bank = combine(rng.standard_normal((2, 1, small_basis.num_basis)), small_basis)
        image = rng.uniform(size=(1, 9, 9))
        out = ses_conv_input(image, bank)
        assert out.shape == (3, 2, 9, 9)
        for si in range(3):
            assert np.array_equal(out[si], conv2d(image, bank.kernels[si]))


class TestSesConvScalewise:
    def test_no_scale_mixing(self, rng, small_basis):
        bank = combine(rng.standard_normal((2, 2, small_basis.num_basis)), small_basis)
        x = rng.standard_normal((3, 2, 8, 8))
        out = ses_conv_scalewise(x, bank)
        for si in range(3):
            assert np.array_equal(out[si], conv2d(x[si], bank.kernels[si]))

    def test_slice_independence(self, rng, small_basis):
        bank = combine(rng.standard_normal((2, 2, small_basis.num_basis)), small_basis)
        x = rng.standard_normal((3, 2, 8, 8))
        out = ses_conv_scalewise(x, bank)
        y = x.copy()
        y[1] = rng.standard_normal((2, 8, 8))
        out2 = ses_conv_scalewise(y, bank)
        assert np.array_equal(out[0], out2[0])
        assert np.array_equal(out[2], out2[2])
        assert not np.array_equal(out[1], out2[1])

    def test_two_layers_equal_per_slice_composition(self, rng, small_basis):
        bank1 = combine(rng.standard_normal((4, 2, small_basis.num_basis)), small_basis)
        bank2 = combine(rng.standard_normal((3, 4, small_basis.num_basis)), small_basis)
        x = rng.standard_normal((3, 2, 9, 9))
        stacked = ses_conv_scalewise(ses_conv_scalewise(x, bank1), bank2)
        for si in range(3):
            direct = conv2d(conv2d(x[si], bank1.kernels[si]), bank2.kernels[si])
            assert np.abs(stacked[si] - direct).max() <= 1e-12

    def test_scale_count_mismatch(self, rng, small_basis):
        bank = combine(rng.standard_normal((2, 2, small_basis.num_basis)), small_basis)
        with pytest.raises(ShapeError, match="scales"):
            ses_conv_scalewise(rng.standard_normal((2, 2, 8, 8)), bank)


class TestScaleProjection:
    def test_equal_slices_pass_through(self, rng):
        slice_ = rng.standard_normal((2, 6, 6))
        x = np.stack([slice_, slice_, slice_])
        assert np.array_equal(scale_projection(x), slice_)

    def test_single_scale_squeeze(self, rng):
        x = rng.standard_normal((1, 3, 5, 5))
        assert np.array_equal(scale_projection(x), x[0])

    def test_max_semantics(self):
        x = np.array([-1.0, 0.0, 2.0]).reshape(3, 1, 1, 1)
        assert scale_projection(x)[0, 0, 0] == 2.0

    def test_dominates_every_slice(self, rng):
        x = rng.standard_normal((3, 2, 7, 7))
        proj = scale_projection(x)
        for si in range(3):
            assert (proj >= x[si]).all()

    def test_idempotent_under_duplication(self, rng):
        x = rng.standard_normal((3, 2, 5, 5))
        doubled = np.concatenate([x, x])
        assert np.array_equal(scale_projection(doubled), scale_projection(x))


class TestSePool:
    def test_window_one_identity(self, rng):
        x = rng.standard_normal((2, 3, 6, 6))
        out = se_pool(x, 1)
        assert np.array_equal(out, x)
        assert out is not x

    def test_window_two_max(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        assert se_pool(x, 2, "max")[0, 0] == np.array([[4.0]])

    def test_avg_matches_box_oracle(self, rng):
        x = rng.standard_normal((2, 2, 8, 12))
        out = se_pool(x, 4, "avg")
        assert out.shape == (2, 2, 2, 3)
        for s in range(2):
            for c in range(2):
                for i in range(2):
                    for j in range(3):
                        block = x[s, c, 4 * i : 4 * i + 4, 4 * j : 4 * j + 4]
                        assert abs(out[s, c, i, j] - block.sum() / 16.0) <= 1e-12

    def test_scale_axis_untouched(self, rng):
        x = rng.standard_normal((3, 2, 8, 8))
        assert se_pool(x, 2).shape == (3, 2, 4, 4)

    def test_clamp_padding_on_ragged_extent(self):
        x = np.arange(5.0).reshape(1, 1, 1, 5)
        out = se_pool(x, 2, "max")
        assert out.shape == (1, 1, 1, 3)
        assert out[0, 0, 0].tolist() == [1.0, 3.0, 4.0]

    def test_invalid_window(self, rng):
        with pytest.raises(ValueError, match="window"):
            se_pool(rng.standard_normal((1, 1, 4, 4)), 0)

    def test_invalid_mode(self, rng):
        with pytest.raises(ValueError, match="mode"):
            se_pool(rng.standard_normal((1, 1, 4, 4)), 2, "median")


class TestSeNorm:
    def test_constant_input_maps_to_zero(self):
        out = se_norm(np.full((2, 3, 5, 5), 4.2))
        assert np.abs(out).max() <= 1e-9

    def test_normalization_identity(self, rng):
        x = 3.0 + 25.0 * rng.standard_normal((3, 4, 12, 12))
        out = se_norm(x)
        for c in range(4):
            vals = out[:, c]
            assert abs(vals.mean()) <= 1e-10
            assert abs(vals.var() - 1.0) <= 1e-6

    def test_matches_two_pass_oracle(self, rng):
        x = rng.standard_normal((2, 3, 7, 9))
        assert np.abs(se_norm(x) - norm_twopass_loops(x, True)).max() <= 1e-10

    def test_norm2d_matches_oracle(self, rng):
        x = rng.standard_normal((3, 8, 9))
        assert np.abs(norm2d(x) - norm_twopass_loops(x, False)).max() <= 1e-10

    def test_commutes_bit_exactly_with_circular_shift(self, rng):
        x = rng.standard_normal((3, 2, 8, 10))
        for shift in [(3, 0), (0, 7), (2, 5)]:
            rolled = np.roll(x, shift, axis=(2, 3))
            assert np.array_equal(se_norm(rolled), np.roll(se_norm(x), shift, axis=(2, 3)))

    def test_epsilon_validated(self, rng):
        with pytest.raises(ValueError, match="epsilon"):
            se_norm(rng.standard_normal((1, 1, 4, 4)), epsilon=0.0)


class TestTranslationEquivariance:
    def test_pipeline_commutes_with_circular_shifts(self, rng, small_basis):
        bank1 = combine(rng.standard_normal((2, 1, small_basis.num_basis)), small_basis)
        bank2 = combine(rng.standard_normal((2, 2, small_basis.num_basis)), small_basis)
        image = rng.uniform(size=(1, 12, 16))
        shift = (4, 6)

        def pipeline(img):
            x = ses_conv_input(img, bank1, BorderPolicy.CIRCULAR)
            x = se_norm(x)
            x = np.maximum(x, 0.0)
            x = ses_conv_scalewise(x, bank2, BorderPolicy.CIRCULAR)
            x = se_pool(x, 2)
            return scale_projection(x)

        rolled = np.roll(image, shift, axis=(1, 2))
        lhs = pipeline(rolled)
        # pool window 2 divides the shift, so pooling commutes as well
        rhs = np.roll(pipeline(image), (shift[0] // 2, shift[1] // 2), axis=(1, 2))
        assert np.array_equal(lhs, rhs)


class TestStack:
    def test_weight_count_independent_of_scales(self):
        counts = []
        for num_scales in (1, 2, 3):
            spec = StackSpec(layers=(LayerSpec(4, 7), LayerSpec(4, 7)), num_scales=num_scales, max_order=2)
            counts.append(build_stack(spec).weight_count)
        assert counts[0] == counts[1] == counts[2]

    def test_single_layer_single_scale_matches_vanilla_bitwise(self):
        spec = StackSpec(kind="ses", layers=(LayerSpec(3, 7),), num_scales=1, max_order=2, seed=5)
        image = synth_image("gaussian-blobs", 24, 24, seed=2)
        ses_out = build_stack(spec).forward(image)
        van_out = build_stack(replace(spec, kind="vanilla")).forward(image)
        assert len(ses_out) == len(van_out) == 1
        assert np.array_equal(ses_out[0], van_out[0])

    def test_deep_single_scale_matches_vanilla_bitwise(self):
        spec = StackSpec(
            kind="ses",
            layers=(LayerSpec(3, 5), LayerSpec(2, 5), LayerSpec(2, 5)),
            num_scales=1,
            max_order=2,
            seed=5,
        )
        image = synth_image("gaussian-blobs", 24, 24, seed=2)
        ses_out = build_stack(spec).forward(image)
        van_out = build_stack(replace(spec, kind="vanilla")).forward(image)
        for a, b in zip(ses_out, van_out):
            assert np.array_equal(a, b)

    def test_forward_deterministic(self):
        spec = StackSpec(layers=(LayerSpec(2, 7), LayerSpec(2, 7)), max_order=2)
        image = synth_image("gaussian-blobs", 32, 32, seed=1)
        a = build_stack(spec).forward(image)
        b = build_stack(spec).forward(image)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_block_shapes_follow_channel_plan(self):
        spec = StackSpec(layers=(LayerSpec(3, 7), LayerSpec(5, 7), LayerSpec(2, 7)), max_order=2)
        blocks = build_stack(spec).forward(synth_image("gaussian-blobs", 20, 28, seed=0))
        assert [b.shape for b in blocks] == [(3, 20, 28), (5, 20, 28), (2, 20, 28)]

    def test_kinds_share_weights(self):
        spec = StackSpec(layers=(LayerSpec(2, 7), LayerSpec(2, 7)), max_order=2, seed=9)
        ses = build_stack(spec)
        van = build_stack(replace(spec, kind="vanilla"))
        for a, b in zip(ses.banks, van.banks):
            assert np.array_equal(a.weights, b.weights)

    def test_invalid_specs_rejected(self):
        with pytest.raises(ConfigError, match="kind"):
            StackSpec(kind="dilated")
        with pytest.raises(ConfigError, match="layer"):
            StackSpec(layers=())
        with pytest.raises(ConfigError, match="nonlinearity"):
            StackSpec(layers=(LayerSpec(2, 7, "tanh"),))
        with pytest.raises(ConfigError, match="max_order"):
            StackSpec(layers=(LayerSpec(2, 3),), max_order=4)

    def test_json_roundtrip(self):
        spec = StackSpec(kind="vanilla", layers=(LayerSpec(3, 9, "none"),), alpha=0.2, seed=4)
        back = StackSpec.from_dict(spec.to_dict())
        assert back == spec

    def test_unknown_json_field_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            StackSpec.from_dict({"kind": "ses", "dropout": 0.5})


class TestHeadlineResidue:
    def test_matched_kernels_beat_single_scale(self):
        basis = build_basis(scale_set_from_alpha(0.1, 3).scaled(2.0), max_order=6, k=11)
        rng = np.random.default_rng(0)
        bank = combine(
            rng.uniform(-1, 1, (4, 1, 49)) / 11.0,
            basis,
            scale_gains=paper_scale_gains(basis.sigmas),
        )
        image = synth_image("gaussian-blobs", 128, 128, seed=11)
        for i, j in [(0, 2), (1, 2)]:
            s = basis.sigmas.sigmas[i] / basis.sigmas.sigmas[j]
            matched = scale_matched_residue(bank, image, i, j)
            fixed = single_scale_residue(bank, image, s)
            assert matched <= 5e-2
            assert fixed > matched
