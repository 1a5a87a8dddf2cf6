import pytest

from slcrec.errors import SchemaError
from slcrec.schema import (
    Dimension,
    FeatureSchema,
    builtin_schema,
    load_schema,
    save_schema,
    schema_from_dict,
)


class TestSchemaInvariants:
    def test_width_sums_categories_and_numerics(self, small_schema):
        assert small_schema.width == 3 + 4 + 2 + 3

    def test_duplicate_dimension_names_rejected(self):
        with pytest.raises(SchemaError):
            FeatureSchema((Dimension("a", "numeric"), Dimension("a", "numeric")))

    def test_duplicate_categories_rejected(self):
        with pytest.raises(SchemaError):
            Dimension("a", "nominal", ("x", "x"))

    def test_nominal_needs_categories(self):
        with pytest.raises(SchemaError):
            Dimension("a", "nominal", ())

    def test_bad_numeric_bounds_rejected(self):
        with pytest.raises(SchemaError):
            Dimension("a", "numeric", bounds=(2.0, 1.0))

    def test_column_spans_tile_the_width(self, small_schema):
        spans = [small_schema.column_span(d.name) for d in small_schema.dimensions]
        flat = [c for start, stop in spans for c in range(start, stop)]
        assert flat == list(range(small_schema.width))

    def test_column_names_match_width(self, small_schema):
        assert len(small_schema.column_names()) == small_schema.width


class TestSchemaHash:
    def test_stable_across_instances(self, small_schema):
        clone = schema_from_dict(small_schema.to_dict())
        assert clone.hash() == small_schema.hash()

    def test_sensitive_to_layout(self, small_schema, nominal_schema):
        assert small_schema.hash() != nominal_schema.hash()


class TestSchemaFiles:
    def test_roundtrip(self, small_schema, tmp_path):
        path = tmp_path / "schema.json"
        save_schema(path, small_schema, (1.0, 5.0))
        loaded, scale = load_schema(path)
        assert loaded == small_schema
        assert scale == (1.0, 5.0)
        assert loaded.hash() == small_schema.hash()

    def test_invalid_scale_rejected(self, small_schema, tmp_path):
        path = tmp_path / "schema.json"
        path.write_text('{"dimensions": [{"name": "x", "kind": "numeric"}], "rating_scale": [5, 1]}')
        with pytest.raises(SchemaError):
            load_schema(path)


class TestBuiltins:
    def test_mobile_sensing_style_widths(self):
        schema, scale = builtin_schema("cars")
        assert schema.width == 268
        assert len(schema.dimensions) == 15
        assert scale == (1.0, 5.0)

    def test_review_site_style_widths(self):
        schema, _ = builtin_schema("yelp")
        assert schema.width == 9
        assert len(schema.dimensions) == 5

    def test_small_width(self):
        schema, _ = builtin_schema("small")
        assert schema.width == 12

    def test_builtin_prefix_accepted(self):
        a, _ = builtin_schema("builtin:small")
        b, _ = builtin_schema("small")
        assert a == b

    def test_unknown_builtin(self):
        with pytest.raises(SchemaError):
            builtin_schema("nope")
