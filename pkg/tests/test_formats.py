import numpy as np
import pytest

from amoebakit.amoeba_geom import PointCloud
from amoebakit.errors import ParseError, UsageError
from amoebakit.formats import cloud_csv, load_json, parse_input, pgm, svg, to_json_obj, write_csv
from amoebakit.poly_core import ExponentialSum, LaurentPolynomial


def test_parse_polynomial(line):
    obj = {"n": 2, "terms": [{"e": [0, 0], "c": [1, 0]}, {"e": [1, 0], "c": 1}, {"e": [0, 1], "c": [1.0, 0.0]}]}
    assert parse_input(obj) == line


def test_parse_exponential(one_plus_exp):
    parsed = parse_input({"n": 1, "terms": [{"f": [0.0], "c": 1}, {"f": [1.0], "c": [1, 0]}]})
    assert isinstance(parsed, ExponentialSum)
    assert parsed == one_plus_exp
    assert parse_input(to_json_obj(parsed)) == parsed


def test_parse_points():
    cloud = parse_input({"points": [[0.025, 0.025], [1, 2]]})
    assert isinstance(cloud, PointCloud)
    assert cloud.n == 2
    assert cloud.points.tolist() == [[0.025, 0.025], [1.0, 2.0]]


@pytest.mark.parametrize(
    "obj,position",
    [
        ([1, 2], "$"),
        ({"terms": []}, "$"),
        ({"n": 0, "terms": []}, "$.n"),
        ({"n": 1, "terms": []}, "$.terms"),
        ({"n": 1, "terms": [{"e": [1]}]}, "$.terms[0]"),
        ({"n": 2, "terms": [{"e": [1], "c": 1}]}, "$.terms[0].e"),
        ({"n": 1, "terms": [{"e": [1.5], "c": 1}]}, "$.terms[0].e[0]"),
        ({"n": 1, "terms": [{"e": [1], "c": "x"}]}, "$.terms[0].c"),
        ({"n": 1, "terms": [{"e": [1], "c": [1, True]}]}, "$.terms[0].c[1]"),
        ({"points": [[0, 0], [1]]}, "$.points[1]"),
        ({"points": [[0, "a"]]}, "$.points[0][1]"),
        ({"points": [[0, 0, 0, 0]]}, "$.points[0]"),
    ],
)
def test_parse_error_positions(obj, position):
    with pytest.raises(ParseError) as info:
        parse_input(obj)
    assert info.value.position == position


def test_load_json(tmp_path):
    good = tmp_path / "p.json"
    good.write_text('{"n": 1}')
    assert load_json(good) == {"n": 1}
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": ')
    with pytest.raises(ParseError):
        load_json(bad)
    with pytest.raises(UsageError):
        load_json(tmp_path / "absent.json")


def test_csv_keeps_seventeen_digits():
    assert write_csv(["a"], [[0.1]]) == "a\n0.10000000000000001\n"
    assert cloud_csv(np.array([[1.0, -2.5]])) == "y1,y2\n1,-2.5\n"


def test_pgm_header_and_orientation():
    image = np.zeros((3, 2), dtype=bool)
    image[0, 1] = True
    data = pgm(image)
    header = b"P5\n3 2\n255\n"
    assert data.startswith(header)
    pixels = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(2, 3)
    # top row of the file is the largest y2
    assert pixels[0].tolist() == [0, 255, 255]
    assert pixels[1].tolist() == [255, 255, 255]


def test_exports_need_two_dimensions():
    with pytest.raises(UsageError):
        pgm(np.zeros(4))
    with pytest.raises(UsageError):
        svg(np.zeros((2, 2, 2), dtype=bool), ((-1, 1),) * 3)


def test_svg_draws_cells():
    mask = np.zeros((2, 2), dtype=bool)
    mask[1, 1] = True
    out = svg(mask, ((-1, 1), (-1, 1)), np.array([[0.0, 0.0]]), size=100)
    assert out.count("<rect") == 1
    assert '<circle cx="50.00" cy="50.00"' in out


def test_polynomial_round_trip_object(monomial):
    assert to_json_obj(monomial) == {"n": 2, "terms": [{"e": [2, -1], "c": [3.0, 0.0]}]}
    assert parse_input(to_json_obj(monomial)) == monomial
    assert isinstance(parse_input(to_json_obj(monomial)), LaurentPolynomial)
