import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from likertmine.errors import DataError, ParseError, UndefinedStatisticError, ValidationError
from likertmine.survey import (
    ATTRIBUTE_NAMES,
    ATTRIBUTE_RANGES,
    HEADER,
    LikertVector,
    RespondentProfile,
    SurveyRecord,
    Violation,
    cronbach_alpha,
    dataset_to_csv,
    make_dataset,
    parse_dataset,
    validate_record,
)
from likertmine.synth import GeneratorSpec, generate_survey

from conftest import constant_dataset, csv_text

ROW = "1,2,3,4,5,1,2,3,4,5,1,2,3,4,5,1,2,3,1,1,2,1,1,1,1,1,1"


def record_with(**changes):
    profile = {name: lo for name, (lo, hi) in ATTRIBUTE_RANGES.items()}
    profile.update(changes)
    return SurveyRecord(0, LikertVector((1,) * 15), RespondentProfile(**profile))


def test_parse_single_row():
    ds = parse_dataset(",".join(HEADER) + "\n" + ROW + "\n")
    assert len(ds) == 1
    assert ds[0].likert.items == (1, 2, 3, 4, 5, 1, 2, 3, 4, 5, 1, 2, 3, 4, 5)
    assert ds[0].id == 0
    assert ds[0].profile.education == 3
    assert ds[0].planted_label is None


def test_header_only_is_empty_dataset():
    with pytest.raises(DataError, match="empty dataset"):
        parse_dataset(",".join(HEADER) + "\n")


def test_out_of_range_item_names_field():
    bad = ROW.replace("1,2,3", "1,2,6", 1)
    with pytest.raises(ValidationError, match=r"q3 out of range \{1\.\.5\}"):
        parse_dataset(",".join(HEADER) + "\n" + bad + "\n")


def test_wrong_column_count_names_row():
    with pytest.raises(ParseError) as err:
        parse_dataset(csv_text([[1] * 27, [1] * 26]))
    assert err.value.row == 2


def test_non_integer_cell_names_row_and_column():
    rows = [[1] * 27]
    rows[0][4] = "x"
    with pytest.raises(ParseError) as err:
        parse_dataset(csv_text(rows))
    assert err.value.column == "q5"


def test_bad_header_rejected():
    with pytest.raises(ParseError):
        parse_dataset(csv_text([[1] * 27], header=list(HEADER[::-1])))


def test_optional_id_label_comment_and_crlf():
    text = "# survey wave 1\r\n" + ",".join(("id",) + HEADER + ("label",)) + "\r\n"
    text += "7," + ROW + ",2\r\n" + "9," + ROW + ",3\r\n"
    ds = parse_dataset(text)
    assert [r.id for r in ds] == [7, 9]
    assert ds.planted_labels.tolist() == [2, 3]
    assert ds.comment is not None


def test_duplicate_ids_rejected():
    text = ",".join(("id",) + HEADER) + "\n" + "1," + ROW + "\n" + "1," + ROW + "\n"
    with pytest.raises(DataError):
        parse_dataset(text)


def test_validate_all_minimum_codes_is_clean():
    assert validate_record(record_with()) == []


def test_validate_career_15():
    assert validate_record(record_with(career=15)) == [Violation("career", 15, 1, 14)]


def test_validate_time_0():
    assert validate_record(record_with(time=0)) == [Violation("time", 0, 1, 5)]


def test_validate_order_is_column_order():
    v = validate_record(record_with(time=9, gender=3))
    assert [x.field for x in v] == ["gender", "time"]


def test_likert_vector_invariants():
    with pytest.raises(ValidationError):
        LikertVector((1,) * 14)
    with pytest.raises(ValidationError):
        LikertVector((0,) + (1,) * 14)


def test_roundtrip_is_byte_identical():
    ds = generate_survey(GeneratorSpec(n=50, seed=3))
    text = dataset_to_csv(ds)
    assert dataset_to_csv(parse_dataset(text)) == text


def test_roundtrip_with_ids_and_comment():
    text = "# note\n" + ",".join(("id",) + HEADER + ("label",)) + "\n" + "4," + ROW + ",1\n"
    assert dataset_to_csv(parse_dataset(io.StringIO(text))) == text


def test_alpha_perfectly_correlated_is_exactly_one():
    assert cronbach_alpha(constant_dataset([1, 2, 3, 4, 5, 2]), range(1, 16)) == 1.0


def test_alpha_identical_records_undefined():
    with pytest.raises(UndefinedStatisticError):
        cronbach_alpha(constant_dataset([3, 3, 3]))


def test_alpha_argument_errors():
    with pytest.raises(DataError):
        cronbach_alpha(constant_dataset([1, 2]), [1])
    with pytest.raises(DataError):
        cronbach_alpha(constant_dataset([1]))


def _alpha_oracle(m):
    # Direct sample-variance formula in floating point.
    k = m.shape[1]
    item_var = sum(np.var(m[:, j], ddof=1) for j in range(k))
    total_var = np.var(m.sum(axis=1), ddof=1)
    return k / (k - 1) * (1 - item_var / total_var)


@pytest.mark.parametrize("items", [range(1, 14), range(1, 16), [2, 9, 14]])
def test_alpha_matches_float_oracle(items):
    m = np.random.default_rng(7).integers(1, 6, size=(500, 15))
    cols = [i - 1 for i in items]
    assert cronbach_alpha(m, items) == pytest.approx(_alpha_oracle(m[:, cols]), abs=1e-12)


def test_alpha_independent_items_near_zero():
    m = np.random.default_rng(7).integers(1, 6, size=(500, 15))
    assert abs(cronbach_alpha(make_dataset(m.tolist()))) <= 0.1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_alpha_invariant_under_record_and_item_order(seed):
    r = np.random.default_rng(seed)
    base = r.integers(1, 6, size=(30, 1))
    m = np.clip(base + r.integers(-1, 2, size=(30, 15)), 1, 5)
    items = list(range(1, 14))
    try:
        a = cronbach_alpha(m, items)
    except UndefinedStatisticError:
        return
    shuffled = m[r.permutation(30)]
    assert cronbach_alpha(shuffled, items[::-1]) == a


def test_synth_records_validate_clean():
    ds = generate_survey(GeneratorSpec(n=300, seed=5))
    assert all(validate_record(r) == [] for r in ds)


def test_make_dataset_shapes():
    ds = make_dataset([[2] * 15, [3] * 15], labels=[1, 3])
    assert ds.likert_matrix.shape == (2, 15)
    assert ds.profile_matrix.shape == (2, len(ATTRIBUTE_NAMES))
    assert ds.has_labels
