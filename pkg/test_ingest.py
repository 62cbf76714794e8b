import itertools
import json
import logging
from fractions import Fraction

import pytest

import store
from dist import background_sum
from errors import ConfigError, IngestError
from ingest import (
    CategoryCodec,
    ConditionalQuery,
    build_config,
    extract_conditional,
    parse_filters,
    scan_conditional,
)

PEOPLE = """id,education,race
1,HS,White
2,HS,White
3,BA,White
4,HS,White
5,PhD,Black
"""


@pytest.fixture
def people_csv(tmp_path):
    path = tmp_path / "people.csv"
    path.write_text(PEOPLE, encoding="utf-8")
    return path


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# =========================
# Extraction
# =========================
def test_conditional_frequencies(people_csv):
    codec = CategoryCodec("education")
    dist = extract_conditional(people_csv, ConditionalQuery("education", (("race", "White"),)), codec)
    assert dist.to_dict() == {"support": [1.0, 2.0], "mass": [0.75, 0.25]}
    # codes follow first appearance over the whole file, matched or not
    assert codec.codes == {"HS": 1, "BA": 2, "PhD": 3}
    assert codec.decode(3) == "PhD"


def test_exact_counts(people_csv):
    counts = scan_conditional(people_csv, ConditionalQuery("education", (("race", "White"),)), CategoryCodec("education"))
    assert counts.matched == 4 and counts.rows == 5 and counts.dropped == 0
    assert counts.frequencies() == {1: Fraction(3, 4), 2: Fraction(1, 4)}


def test_single_category_is_a_point_mass(people_csv):
    dist = extract_conditional(people_csv, ConditionalQuery("education", (("race", "Black"),)), CategoryCodec("education"))
    assert dist.is_point_mass() and dist.support[0] == 3.0


def test_no_filters_uses_every_row(people_csv):
    dist = extract_conditional(people_csv, ConditionalQuery("education"), CategoryCodec("education"))
    assert dist.pmf(1.0) == pytest.approx(0.6)


def test_whitespace_is_stripped(tmp_path):
    path = write(tmp_path, "padded.csv", "edu,race\n HS ,White\nHS, White \n")
    dist = extract_conditional(path, ConditionalQuery("edu", (("race", "White"),)), CategoryCodec("edu"))
    assert dist.is_point_mass()


def test_empty_cells_are_dropped(tmp_path, caplog):
    caplog.set_level(logging.WARNING, logger="ingest")
    path = write(tmp_path, "gaps.csv", "edu,race\nHS,White\n,White\nBA,\nBA,White\n")
    counts = scan_conditional(path, ConditionalQuery("edu", (("race", "White"),)), CategoryCodec("edu"))
    assert counts.dropped == 2 and counts.matched == 2
    assert "dropped 2 row(s)" in caplog.text


def test_ragged_row_reports_its_line(tmp_path):
    path = write(tmp_path, "ragged.csv", "edu,race\nHS,White\nBA\n")
    with pytest.raises(IngestError) as info:
        scan_conditional(path, ConditionalQuery("edu"), CategoryCodec("edu"))
    assert info.value.line == 3


def test_undecodable_row_reports_its_line(tmp_path):
    path = tmp_path / "latin.csv"
    path.write_bytes(b"edu,race\nHS,White\n\xff\xfe,White\n")
    with pytest.raises(IngestError, match="not valid UTF-8") as info:
        scan_conditional(path, ConditionalQuery("edu"), CategoryCodec("edu"))
    assert info.value.line == 3


def test_extra_fields_are_ragged_too(tmp_path):
    path = write(tmp_path, "wide.csv", "edu,race\nHS,White,extra\n")
    with pytest.raises(IngestError):
        scan_conditional(path, ConditionalQuery("edu"), CategoryCodec("edu"))


def test_missing_column(people_csv):
    with pytest.raises(IngestError, match="missing column"):
        scan_conditional(people_csv, ConditionalQuery("income"), CategoryCodec("income"))


def test_filter_matching_nothing(people_csv):
    with pytest.raises(IngestError, match="matched no rows"):
        scan_conditional(people_csv, ConditionalQuery("education", (("race", "Asian"),)), CategoryCodec("education"))


def test_empty_file(tmp_path):
    with pytest.raises(IngestError, match="empty CSV"):
        scan_conditional(write(tmp_path, "empty.csv", ""), ConditionalQuery("edu"), CategoryCodec("edu"))


def test_target_cannot_be_a_filter():
    with pytest.raises(IngestError):
        ConditionalQuery("edu", (("edu", "HS"),))


def test_parse_filters():
    assert parse_filters("race=White, sex = F") == (("race", "White"), ("sex", "F"))
    assert parse_filters({"race": "White"}) == (("race", "White"),)
    assert parse_filters([["race", "White"]]) == (("race", "White"),)
    assert parse_filters("") == ()
    with pytest.raises(IngestError):
        parse_filters("race")


# =========================
# Codes files
# =========================
def test_codec_save_and_load(tmp_path, people_csv):
    codec = CategoryCodec("education")
    extract_conditional(people_csv, ConditionalQuery("education"), codec)
    codec.save(tmp_path / "codes.json")
    loaded = CategoryCodec.load(tmp_path / "codes.json")
    assert loaded.frozen and loaded.codes == codec.codes


def test_frozen_codec_rejects_new_categories(tmp_path, people_csv):
    store.write_json_atomic(tmp_path / "codes.json", {"column": "education", "codes": {"HS": 1}})
    codec = CategoryCodec.load(tmp_path / "codes.json")
    with pytest.raises(IngestError, match="'BA'"):
        scan_conditional(people_csv, ConditionalQuery("education", (("race", "White"),)), codec)


def test_frozen_codec_keeps_its_numbering(tmp_path, people_csv):
    store.write_json_atomic(tmp_path / "codes.json", {"column": "education", "codes": {"BA": 7, "HS": 2, "PhD": 9}})
    dist = extract_conditional(
        people_csv, ConditionalQuery("education", (("race", "White"),)), CategoryCodec.load(tmp_path / "codes.json")
    )
    assert dist.to_dict() == {"support": [2.0, 7.0], "mass": [0.75, 0.25]}


def test_malformed_codes_file(tmp_path):
    store.write_json_atomic(tmp_path / "codes.json", {"codes": ["HS"]})
    with pytest.raises(ConfigError):
        CategoryCodec.load(tmp_path / "codes.json")


def test_codes_must_be_injective():
    with pytest.raises(IngestError):
        CategoryCodec("edu", {"HS": 1, "BA": 1})


# =========================
# Config assembly
# =========================
def brute_force_background(dists):
    out = {}
    for combo in itertools.product(*[list(zip(d.support, d.mass)) for d in dists]):
        total = sum(v for v, _ in combo)
        weight = 1.0
        for _, m in combo:
            weight *= m
        out[total] = out.get(total, 0.0) + weight
    return {k: v for k, v in out.items() if v > 0}


def test_build_config_from_inline_entries(four_user_config):
    entries = [u.to_dict() for u in four_user_config.users]
    config = build_config(entries)
    assert config == four_user_config
    background = background_sum(config, "u4")
    expected = brute_force_background([u.distribution for u in config.users[:3]])
    assert sorted(expected) == list(background.support)
    for value, mass in expected.items():
        assert background.pmf(value) == pytest.approx(mass, abs=1e-12)


def test_build_config_mixes_files_and_csv_sources(tmp_path, people_csv, user1):
    store.save_distribution(tmp_path / "u1.json", user1)
    config = build_config(
        [
            {"id": "alice", "presence": 0.5, "distribution": "u1.json"},
            {"id": "bob", "source": {"csv": "people.csv", "target": "education", "filters": "race=White"}},
        ],
        base_dir=str(tmp_path),
    )
    assert config.user("alice").distribution == user1
    assert config.user("bob").presence == 1.0
    assert config.user("bob").distribution.pmf(1.0) == pytest.approx(0.75)


def test_build_config_uses_an_existing_codes_file(tmp_path, people_csv):
    store.write_json_atomic(tmp_path / "codes.json", {"column": "education", "codes": {"HS": 5, "BA": 6, "PhD": 7}})
    source = {"csv": "people.csv", "target": "education", "filters": {"race": "White"}, "codes": "codes.json"}
    config = build_config([{"id": "bob", "source": source}], base_dir=str(tmp_path))
    assert list(config.user("bob").distribution.support) == [5.0, 6.0]


def test_build_config_round_trips_through_json(tmp_path, four_user_config):
    store.save_config(tmp_path / "config.json", build_config([u.to_dict() for u in four_user_config.users]))
    assert store.load_config(tmp_path / "config.json") == four_user_config
    assert json.loads((tmp_path / "config.json").read_text())["users"][3]["id"] == "u4"


@pytest.mark.parametrize(
    "entries",
    [
        [],
        [{"presence": 1.0, "distribution": {"support": [1], "mass": [1]}}],
        [{"id": "x"}],
        [{"id": "x", "presence": "often", "distribution": {"support": [1], "mass": [1]}}],
        [{"id": "x", "source": {"target": "edu"}}],
    ],
)
def test_build_config_rejects_bad_entries(entries):
    with pytest.raises(ConfigError):
        build_config(entries)
