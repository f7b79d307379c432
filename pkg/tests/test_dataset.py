import io
import json
import pytest
from subrate.block import CoeffBlock, DatasetRecord
from subrate.dataset import *
from subrate.failures import CompositeDatasetFailure, DatasetFailure, RecordPath
from subrate.synth import SynthConfig, generate


LINE = '{"source_id":"img0001:17","width":4,"height":4,"qp":22,"coeffs":[5,2,0,0,1,0,0,0,0,0,0,0,0,0,0,0],"rate":17.0}'


def record(**kwargs):
    doc = json.loads(LINE)
    doc.update(kwargs)
    return json.dumps(doc)


class TestParseRecord:
    def test_parse(self):
        r = parse_record(LINE, 1)
        assert r.block == CoeffBlock.from_grid([[5, 2, 0, 0], [1, 0, 0, 0], [0] * 4, [0] * 4], 22, "img0001:17")
        assert r.rate_bits == 17.0

    def test_default_source(self):
        doc = json.loads(LINE)
        del doc["source_id"]
        assert parse_record(json.dumps(doc)).block.source_id == ""

    def test_extra_fields(self):
        assert parse_record(record(frame=3)).rate_bits == 17.0

    def test_not_json(self):
        with pytest.raises(DatasetFailure) as e:
            parse_record("{", 4)
        assert e.value.path == RecordPath(4)
        assert str(e.value).startswith("line 4: ")

    def test_not_object(self):
        with pytest.raises(DatasetFailure):
            parse_record("[1, 2]", 1)

    def test_count_mismatch(self):
        with pytest.raises(CompositeDatasetFailure) as e:
            parse_record(record(coeffs=[0] * 15), 7)
        assert "coeffs" in e.value
        assert e.value["coeffs"].name == "size-mismatch"
        assert "line 7.coeffs" in str(e.value)

    def test_fields(self):
        with pytest.raises(CompositeDatasetFailure) as e:
            parse_record(record(width=6, height=-4, rate=-1, qp="22"), 2)
        f = e.value
        assert len(f) == 4
        assert f["width"].name == "multiple_of"
        assert f["height"].name == "positive"
        assert f["rate"].name == "non_negative"
        assert f["qp"].name == "integer"

    def test_missing(self):
        doc = json.loads(LINE)
        del doc["rate"]
        with pytest.raises(CompositeDatasetFailure) as e:
            parse_record(json.dumps(doc), 1)
        assert e.value["rate"].name == "missing"

    def test_coefficient(self):
        coeffs = [0] * 16
        coeffs[15] = 1.5
        with pytest.raises(CompositeDatasetFailure) as e:
            parse_record(record(coeffs=coeffs), 3)
        assert [repr(p) for p, _ in e.value] == ["line 3.coeffs[15]"]

    def test_coefficient_range(self):
        coeffs = [0] * 16
        coeffs[2] = 2 ** 31
        with pytest.raises(CompositeDatasetFailure) as e:
            parse_record(record(coeffs=coeffs), 3)
        assert "coeffs[2]" in e.value

    def test_rate_not_finite(self):
        with pytest.raises(CompositeDatasetFailure):
            parse_record(LINE.replace("17.0", "NaN"), 1)


class TestReadWrite:
    def test_round_trip(self, tmp_path):
        data = generate(SynthConfig(n_blocks=1000, seed=3, size_set=((4, 4), (8, 4), (16, 16))))
        data.records.append(DatasetRecord(CoeffBlock(4, 4, [-(2 ** 31)] + [2 ** 31 - 1] * 15, 51, "edge"), 0.1 + 0.2))
        path = tmp_path / "data.jsonl"
        write_dataset(data, path)
        restored = read_dataset(path)
        assert restored.records == data.records
        assert restored.format_version == FORMAT_VERSION

    def test_stream(self):
        out = io.StringIO()
        write_dataset([parse_record(LINE)], out)
        text = out.getvalue()
        assert text.splitlines() == ['{"format_version": 1}', LINE]
        assert list(iter_records(io.StringIO(text))) == [parse_record(LINE)]

    def test_empty(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert len(read_dataset(path)) == 0

    def test_blank_lines(self):
        assert len(read_dataset(io.StringIO(f"\n{LINE}\n\n{LINE}\n"))) == 2

    def test_without_header(self):
        assert len(read_dataset(io.StringIO(LINE + "\n"))) == 1

    def test_unsupported_version(self):
        with pytest.raises(DatasetFailure) as e:
            read_dataset(io.StringIO('{"format_version": 2}\n' + LINE))
        assert e.value.name == "version"

    def test_malformed_line(self):
        text = "\n".join([LINE, LINE, record(width=8)])
        with pytest.raises(DatasetFailure) as e:
            read_dataset(io.StringIO(text))
        assert e.value.path == RecordPath(3)

    def test_lazy(self):
        records = iter_records(io.StringIO("\n".join([LINE, "oops"])))
        assert next(records).rate_bits == 17.0
        with pytest.raises(DatasetFailure):
            next(records)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetFailure):
            read_dataset(tmp_path / "absent.jsonl")

    def test_header_after_blank_lines(self):
        assert len(read_dataset(io.StringIO("\n\n{\"format_version\": 1}\n" + LINE))) == 1
        with pytest.raises(DatasetFailure) as e:
            read_dataset(io.StringIO("\n{\"format_version\": 2}\n" + LINE))
        assert e.value.name == "version"
        assert e.value.path == RecordPath(2)

    def test_invalid_utf8(self, tmp_path):
        path = tmp_path / "latin1.jsonl"
        path.write_bytes(LINE.encode() + b"\n" + record(source_id="x").encode().replace(b"\"x\"", b"\"\xff\xfe\""))
        with pytest.raises(DatasetFailure) as e:
            read_dataset(path)
        assert e.value.name == "encoding"
        assert e.value.path == RecordPath(2)
        assert e.value.exit_code == 2


class TestFeaturesCsv:
    def test_rows(self):
        out = io.StringIO()
        write_features_csv([parse_record(LINE)], out)
        header, row = out.getvalue().splitlines()
        assert header == "source_id,width,height,qp,S,L,Z,E,rate_bits"
        values = row.split(",")
        assert values[:5] == ["img0001:17", "4", "4", "22", "3"]
        assert float(values[5]) == pytest.approx(3.321928, abs=1e-6)
        assert values[6] == "3"
        assert float(values[7]) == pytest.approx(0.543564, abs=1e-6)
        assert values[8] == "17.0"

    def test_empty(self):
        out = io.StringIO()
        write_features_csv([], out)
        assert out.getvalue() == "source_id,width,height,qp,S,L,Z,E,rate_bits\n"
