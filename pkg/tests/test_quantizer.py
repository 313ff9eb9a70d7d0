import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doslab import SaturationError
from doslab.conditions import ThetaSet, ThetaVariant
from doslab.quantizer import (
    Outcome,
    QuantIndex,
    RangeScheme,
    RangeState,
    UniformCodec,
    classify_outcome,
    decode,
    derive_input_range,
    encode,
    initial_ranges,
    quantization_error_bound,
    update_range,
)

from .conftest import BATCH_C, rng

THETAS = ThetaSet(theta_attack=3.0, theta_first=1.2, theta_steady=0.8,
                  variant=ThetaVariant.DUAL)


def roundtrip(v, center, rng_val, codec):
    return decode(encode(v, center, rng_val, codec), center, rng_val, codec)


class TestEncodeDecode:
    def test_center_of_odd_grid(self):
        codec = UniformCodec(levels=3, dim=2)
        idx = encode([0.5, 0.5], [0.5, 0.5], 1.0, codec)
        assert idx.cells == (1, 1)
        np.testing.assert_array_equal(decode(idx, [0.5, 0.5], 1.0, codec),
                                      [0.5, 0.5])

    def test_upper_boundary_clamps(self):
        codec = UniformCodec(levels=4, dim=1)
        idx = encode([1.0], [0.0], 1.0, codec)
        assert idx.cells == (3,)

    def test_shared_boundary_goes_to_lower_box(self):
        codec = UniformCodec(levels=2, dim=1)
        # the exact midpoint is on the boundary of both boxes
        assert encode([0.0], [0.0], 1.0, codec).cells == (0,)

    def test_even_grid_decodes_off_zero(self):
        codec = UniformCodec(levels=2, dim=1)
        assert decode(QuantIndex((0,)), [0.0], 1.0, codec)[0] == -0.5
        assert decode(QuantIndex((1,)), [0.0], 1.0, codec)[0] == 0.5

    def test_zero_range_requires_exact_center(self):
        codec = UniformCodec(levels=3, dim=1)
        idx = encode([2.0], [2.0], 0.0, codec)
        assert decode(idx, [2.0], 0.0, codec)[0] == 2.0
        with pytest.raises(SaturationError):
            encode([2.0 + 1e-12], [2.0], 0.0, codec)

    def test_saturation_raises(self):
        codec = UniformCodec(levels=10, dim=2)
        with pytest.raises(SaturationError):
            encode([1.5, 0.0], [0.0, 0.0], 1.0, codec)

    def test_clip_mode_never_raises(self):
        codec = UniformCodec(levels=10, dim=1)
        idx = encode([5.0], [0.0], 1.0, codec, clip=True)
        assert idx.cells == (9,)

    def test_roundtrip_error_bound(self):
        g = rng(3)
        codec = UniformCodec(levels=10, dim=3)
        center = np.array([1.0, -2.0, 0.5])
        for _ in range(200):
            v = center + g.uniform(-1, 1, size=3) * 2.0
            out = roundtrip(v, center, 2.0, codec)
            assert np.max(np.abs(out - v)) <= quantization_error_bound(2.0, codec)

    @settings(max_examples=80)
    @given(
        v=st.lists(st.floats(-1.0, 1.0), min_size=2, max_size=2),
        levels=st.sampled_from([2, 3, 10, 100]),
    )
    def test_roundtrip_property(self, v, levels):
        codec = UniformCodec(levels=levels, dim=2)
        out = roundtrip(np.array(v), np.zeros(2), 1.0, codec)
        # exact boundary points attain the bound; the subtraction may round
        # one ulp past it when range/levels is not representable
        assert np.max(np.abs(out - np.array(v))) <= (1.0 / levels) * (1 + 1e-15)

    def test_even_levels_avoid_zero_exactly(self):
        for levels in (2, 4, 10, 100):
            codec = UniformCodec(levels=levels, dim=1)
            for cell in range(levels):
                out = decode(QuantIndex((cell,)), [0.0], 1.0, codec)
                assert abs(out[0]) >= 1.0 / levels

    def test_determinism(self):
        codec = UniformCodec(levels=17, dim=4)
        g = rng(9)
        v = g.uniform(-1, 1, size=4)
        first = encode(v, np.zeros(4), 1.5, codec)
        for _ in range(5):
            assert encode(v, np.zeros(4), 1.5, codec) == first

    def test_wire_format_roundtrip(self):
        codec = UniformCodec(levels=100, dim=3)
        idx = QuantIndex((7, 0, 99))
        word = idx.to_wire(codec)
        assert word == 7 * 100 ** 2 + 0 * 100 + 99
        assert QuantIndex.from_wire(word, codec) == idx


class TestClassifyOutcome:
    def test_initial_successful_slot_is_first_success(self):
        assert (classify_outcome(False, False, 0)
                is Outcome.FIRST_SUCCESS_AFTER_ATTACK)

    def test_attacked(self):
        assert classify_outcome(True, False, 5) is Outcome.ATTACKED

    def test_recovery_and_steady(self):
        assert (classify_outcome(False, True, 5)
                is Outcome.FIRST_SUCCESS_AFTER_ATTACK)
        assert (classify_outcome(False, False, 5)
                is Outcome.CONSECUTIVE_SUCCESS)


class TestUpdateRange:
    def test_constant_scheme_never_moves(self):
        rs = RangeState(0.0, RangeScheme.CONSTANT, THETAS)
        for outcome in Outcome:
            rs = update_range(rs, outcome)
            assert rs.value == 0.0

    def test_branch_factors(self):
        rs = RangeState(1.0, RangeScheme.OUTPUT_DUAL, THETAS)
        assert update_range(rs, Outcome.ATTACKED).value == 3.0
        assert update_range(rs, Outcome.FIRST_SUCCESS_AFTER_ATTACK).value == 1.2
        assert update_range(rs, Outcome.CONSECUTIVE_SUCCESS).value == 0.8

    def test_alternating_product(self):
        outcomes = [Outcome.ATTACKED, Outcome.FIRST_SUCCESS_AFTER_ATTACK,
                    Outcome.CONSECUTIVE_SUCCESS, Outcome.ATTACKED,
                    Outcome.ATTACKED, Outcome.FIRST_SUCCESS_AFTER_ATTACK,
                    Outcome.CONSECUTIVE_SUCCESS, Outcome.CONSECUTIVE_SUCCESS,
                    Outcome.ATTACKED, Outcome.FIRST_SUCCESS_AFTER_ATTACK]
        factors = {Outcome.ATTACKED: 3.0,
                   Outcome.FIRST_SUCCESS_AFTER_ATTACK: 1.2,
                   Outcome.CONSECUTIVE_SUCCESS: 0.8}
        rs = RangeState(1.0, RangeScheme.OUTPUT_DUAL, THETAS)
        product = 1.0
        for outcome in outcomes:
            rs = update_range(rs, outcome)
            product *= factors[outcome]
        assert rs.value == pytest.approx(product, rel=1e-12)

    def test_attacked_branch_uses_lifted_norm(self, reactor_dp, reactor_gains):
        from doslab import derive_decay_constants, inf_norm
        from doslab.conditions import compute_thetas

        dc = derive_decay_constants(reactor_gains, reactor_dp)
        thetas = compute_thetas(ThetaVariant.DUAL, dc, reactor_dp,
                                (3, 10_000, 10_000))
        rs = RangeState(1.0, RangeScheme.OUTPUT_DUAL, thetas)
        out = update_range(rs, Outcome.ATTACKED)
        assert out.value == pytest.approx(inf_norm(reactor_dp.a_lift),
                                          rel=1e-15)

    def test_mismatch_encoder_two_branch_law(self):
        rs = RangeState(1.0, RangeScheme.MISMATCH_ENCODER, THETAS)
        rs = update_range(rs, Outcome.ATTACKED)  # blind to the outcome
        assert rs.value == 1.2
        rs = update_range(rs, Outcome.ATTACKED)
        assert rs.value == pytest.approx(1.2 * 0.8, rel=1e-15)

    def test_input_scheme_rejected(self):
        rs = RangeState(1.0, RangeScheme.INPUT, THETAS)
        with pytest.raises(ValueError):
            update_range(rs, Outcome.ATTACKED)

    def test_contraction_when_steady_below_one(self):
        rs = RangeState(1.0, RangeScheme.OUTPUT_ACK, THETAS)
        previous = rs.value
        for _ in range(5):
            rs = update_range(rs, Outcome.CONSECUTIVE_SUCCESS)
            assert rs.value < previous
            previous = rs.value


class TestDeriveInputRange:
    def test_nilpotent_power_gives_zero(self, reactor_dp, reactor_gains):
        codec3 = UniformCodec(levels=100, dim=2)
        assert derive_input_range(1.0, reactor_dp.eta, reactor_gains,
                                  codec3) <= 1e-12

    def test_zero_output_range(self, reactor_gains):
        codec3 = UniformCodec(levels=100, dim=2)
        assert derive_input_range(0.0, 0, reactor_gains, codec3) == 0.0

    def test_first_substep_matches_product_oracle(self, reactor_gains):
        from doslab import inf_norm

        codec3 = UniformCodec(levels=100, dim=2)
        got = derive_input_range(1.0, 0, reactor_gains, codec3)
        want = (99 / 100) * inf_norm(
            reactor_gains.controller_gain @ reactor_gains.observer_gain
        )
        assert got == pytest.approx(want, rel=1e-15)


class TestInitialRanges:
    def test_zero_bound(self):
        assert initial_ranges(0.0, BATCH_C) == (0.0, 0.0, 0.0)

    def test_identity_output(self):
        assert initial_ranges(3.0, np.eye(2)) == (0.0, 0.0, 3.0)

    def test_batch_reactor_output_row_sum(self):
        e1, e2, e3 = initial_ranges(1.0, BATCH_C)
        assert (e1, e2) == (0.0, 0.0)
        assert e3 == 3.0  # max |row sum| of the output map
