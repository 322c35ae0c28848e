from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from handmend.dataset import (
    DEFAULT_REDRAWN_SUFFIX,
    REFERENCE_IMAGE_COUNT,
    REFERENCE_TEST_COUNT,
    REFERENCE_TRAIN_COUNT,
    AnnotationRecord,
    EmptyInput,
    HandAnnotation,
    ImagePair,
    ParseError,
    build_pairs,
    load_annotation_dir,
    parse_annotations,
    read_id_list,
    read_pair_index,
    serialize_annotations,
    split_pairs,
    write_id_list,
    write_pair_index,
)

coord = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
extent = st.floats(min_value=1e-6, max_value=1.0, allow_nan=False)
hand_strategy = st.builds(
    HandAnnotation,
    label=st.sampled_from([0, 1]),
    cx=coord,
    cy=coord,
    w=extent,
    h=extent,
)


class TestParse:
    def test_single_non_standard_hand(self):
        (hand,) = parse_annotations("1 0.5 0.5 0.2 0.3")
        assert hand == HandAnnotation(label=1, cx=0.5, cy=0.5, w=0.2, h=0.3)

    def test_two_hands(self):
        hands = parse_annotations("0 0.1 0.1 0.05 0.05\n1 0.9 0.9 0.1 0.1")
        assert [h.label for h in hands] == [0, 1]

    def test_label_out_of_domain(self):
        with pytest.raises(ParseError) as err:
            parse_annotations("2 0.5 0.5 0.1 0.1")
        assert err.value.line == 1
        assert err.value.column == 1

    def test_blank_lines_skipped_but_counted(self):
        with pytest.raises(ParseError) as err:
            parse_annotations("0 0.5 0.5 0.1 0.1\n\n1 0.5 0.5 0.1 bad")
        assert err.value.line == 3

    def test_wrong_field_count(self):
        with pytest.raises(ParseError) as err:
            parse_annotations("0 0.5 0.5 0.1")
        assert "expected 5 fields" in err.value.reason

    def test_extra_field_column_points_at_surplus(self):
        with pytest.raises(ParseError) as err:
            parse_annotations("0 0.5 0.5 0.1 0.1 0.9")
        assert err.value.column == 19

    def test_non_numeric_column(self):
        with pytest.raises(ParseError) as err:
            parse_annotations("0 0.5 oops 0.1 0.1")
        assert err.value.column == 7
        assert "cy" in err.value.reason

    def test_out_of_range_coordinate(self):
        with pytest.raises(ParseError) as err:
            parse_annotations("0 0.5 1.5 0.1 0.1")
        assert "cy" in err.value.reason

    def test_zero_extent_rejected(self):
        with pytest.raises(ParseError) as err:
            parse_annotations("0 0.5 0.5 0.0 0.1")
        assert "w" in err.value.reason

    def test_empty_text_is_no_hands(self):
        assert parse_annotations("") == []
        assert parse_annotations("\n  \n") == []


class TestSerialize:
    def test_canonical_form(self):
        hand = HandAnnotation(label=1, cx=0.5, cy=0.25, w=0.125, h=0.0625)
        assert serialize_annotations([hand]) == "1 0.500000 0.250000 0.125000 0.062500\n"

    def test_empty_is_empty_string(self):
        assert serialize_annotations([]) == ""

    @given(st.lists(hand_strategy, max_size=8))
    def test_round_trip_idempotent(self, hands):
        once = serialize_annotations(hands)
        assert serialize_annotations(parse_annotations(once)) == once


class TestAnnotationModel:
    def test_hand_validation(self):
        with pytest.raises(ValueError):
            HandAnnotation(label=2, cx=0.5, cy=0.5, w=0.1, h=0.1)
        with pytest.raises(ValueError):
            HandAnnotation(label=0, cx=-0.1, cy=0.5, w=0.1, h=0.1)
        with pytest.raises(ValueError):
            HandAnnotation(label=0, cx=0.5, cy=0.5, w=0.0, h=0.1)

    def test_record_flags(self):
        standard = HandAnnotation(label=0, cx=0.5, cy=0.5, w=0.1, h=0.1)
        odd = HandAnnotation(label=1, cx=0.2, cy=0.2, w=0.1, h=0.1)
        record = AnnotationRecord("img", 64, 64, (standard, odd))
        assert record.has_non_standard
        assert not record.all_standard
        empty = AnnotationRecord("img", 64, 64, ())
        assert empty.all_standard
        assert not empty.has_non_standard

    def test_record_dimension_validation(self):
        with pytest.raises(ValueError):
            AnnotationRecord("img", 0, 64, ())

    def test_reference_counts_sum_to_image_count(self):
        # the published split counts sum to the image count, preserved
        # here exactly as documented
        assert REFERENCE_TRAIN_COUNT + REFERENCE_TEST_COUNT == REFERENCE_IMAGE_COUNT


def _write_image(path, size=(32, 24)):
    Image.new("RGB", size, (120, 130, 140)).save(path)


class TestLoadDir:
    def test_loads_matched_pairs_and_warns_on_orphans(self, tmp_path):
        _write_image(tmp_path / "a.png")
        (tmp_path / "a.txt").write_text("1 0.5 0.5 0.2 0.2\n", encoding="utf-8")
        _write_image(tmp_path / "b.png")
        (tmp_path / "c.txt").write_text("0 0.5 0.5 0.2 0.2\n", encoding="utf-8")
        records, warnings = load_annotation_dir(tmp_path)
        assert set(records) == {"a"}
        assert records["a"].image_w == 32
        assert records["a"].image_h == 24
        assert records["a"].has_non_standard
        assert any("b.png" in w for w in warnings)
        assert any("c.txt" in w for w in warnings)

    def test_parse_error_names_file(self, tmp_path):
        _write_image(tmp_path / "a.png")
        (tmp_path / "a.txt").write_text("9 0.5 0.5 0.2 0.2\n", encoding="utf-8")
        with pytest.raises(ParseError, match="a.txt"):
            load_annotation_dir(tmp_path)


def _record(image_id, labels):
    hands = tuple(
        HandAnnotation(label=label, cx=0.5, cy=0.5, w=0.2, h=0.2) for label in labels
    )
    return AnnotationRecord(image_id, 64, 64, hands)


class TestBuildPairs:
    def _dirs(self, tmp_path, originals, redrawns):
        original_dir = tmp_path / "orig"
        redrawn_dir = tmp_path / "redrawn"
        original_dir.mkdir()
        redrawn_dir.mkdir()
        for name in originals:
            _write_image(original_dir / f"{name}.png")
        for name in redrawns:
            _write_image(redrawn_dir / f"{name}.png")
        return original_dir, redrawn_dir

    def test_pair_emitted_for_non_standard_redrawn(self, tmp_path):
        orig, redrawn = self._dirs(tmp_path, ["x"], ["x_redrawn"])
        annotations = {"x": _record("x", [0]), "x_redrawn": _record("x_redrawn", [0, 1])}
        pairs, warnings = build_pairs(orig, redrawn, annotations)
        assert pairs == [ImagePair("x", "x" + DEFAULT_REDRAWN_SUFFIX)]
        assert warnings == []

    def test_all_standard_redrawn_excluded_silently(self, tmp_path):
        orig, redrawn = self._dirs(tmp_path, ["x"], ["x_redrawn"])
        annotations = {"x": _record("x", [0]), "x_redrawn": _record("x_redrawn", [0])}
        pairs, warnings = build_pairs(orig, redrawn, annotations)
        assert pairs == []
        assert warnings == []

    def test_non_standard_original_excluded_with_warning(self, tmp_path):
        orig, redrawn = self._dirs(tmp_path, ["x"], ["x_redrawn"])
        annotations = {"x": _record("x", [1]), "x_redrawn": _record("x_redrawn", [1])}
        pairs, warnings = build_pairs(orig, redrawn, annotations)
        assert pairs == []
        assert any("non-standard" in w for w in warnings)

    def test_orphans_warn_not_fail(self, tmp_path):
        orig, redrawn = self._dirs(tmp_path, ["x", "y"], ["x_redrawn", "z_redrawn"])
        annotations = {"x": _record("x", [0]), "x_redrawn": _record("x_redrawn", [1])}
        pairs, warnings = build_pairs(orig, redrawn, annotations)
        assert pairs == [ImagePair("x", "x_redrawn")]
        assert any("'y'" in w for w in warnings)
        assert any("'z_redrawn'" in w for w in warnings)

    def test_missing_annotation_records_warn(self, tmp_path):
        orig, redrawn = self._dirs(tmp_path, ["x"], ["x_redrawn"])
        pairs, warnings = build_pairs(orig, redrawn, {})
        assert pairs == []
        assert any("no annotation record" in w for w in warnings)

    def test_output_sorted_by_id(self, tmp_path):
        orig, redrawn = self._dirs(
            tmp_path, ["m", "a", "z"], ["m_redrawn", "a_redrawn", "z_redrawn"]
        )
        annotations = {}
        for name in ("m", "a", "z"):
            annotations[name] = _record(name, [0])
            annotations[name + "_redrawn"] = _record(name + "_redrawn", [1])
        pairs, _ = build_pairs(orig, redrawn, annotations)
        assert [p.original_id for p in pairs] == ["a", "m", "z"]


class TestSplit:
    def _pairs(self, n):
        return [ImagePair(f"img{i:03d}", f"img{i:03d}_redrawn") for i in range(n)]

    def test_ten_pairs_ninety_ten(self):
        train, test = split_pairs(self._pairs(10), 0.9, seed=3)
        assert len(train) == 9
        assert len(test) == 1

    def test_same_seed_identical(self):
        pairs = self._pairs(25)
        assert split_pairs(pairs, 0.8, seed=7) == split_pairs(pairs, 0.8, seed=7)

    def test_different_seed_usually_differs(self):
        pairs = self._pairs(25)
        assert split_pairs(pairs, 0.8, seed=1) != split_pairs(pairs, 0.8, seed=2)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            split_pairs([], 0.9, seed=0)

    def test_fraction_bounds(self):
        pairs = self._pairs(4)
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                split_pairs(pairs, bad, seed=0)

    @settings(max_examples=60)
    @given(
        n=st.integers(min_value=1, max_value=40),
        fraction=st.floats(min_value=0.01, max_value=0.99),
        seed=st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_partition_property(self, n, fraction, seed):
        pairs = self._pairs(n)
        train, test = split_pairs(pairs, fraction, seed)
        assert len(train) == round(fraction * n)
        assert sorted(train + test, key=lambda p: p.original_id) == pairs
        assert not set(train) & set(test)


class TestIndexFiles:
    def test_pair_index_round_trip(self, tmp_path):
        pairs = [ImagePair("a", "a_redrawn"), ImagePair("b", "b_redrawn")]
        path = tmp_path / "pairs.tsv"
        write_pair_index(pairs, path)
        assert read_pair_index(path) == pairs

    def test_pair_index_malformed_line(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("a only-one-column-no-tab\n", encoding="utf-8")
        with pytest.raises(ParseError) as err:
            read_pair_index(path)
        assert err.value.line == 1

    def test_id_list_round_trip(self, tmp_path):
        pairs = [ImagePair("a", "a_redrawn"), ImagePair("b", "b_redrawn")]
        path = tmp_path / "train.txt"
        write_id_list(pairs, path)
        assert read_id_list(path) == ["a", "b"]
