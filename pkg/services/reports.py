import csv
import io
import math
from dataclasses import asdict, dataclass, fields

from config import Config
from utils import dump_json

CSV_COLUMNS = [
    'protocol', 'axis', 'axis_value', 'n_r', 'mlr_analysis', 'mlr_sim', 'mlr_sim_stderr',
    'rdc_analysis', 'rdc_sim', 'optimal', 'seed', 'replications', 'error',
]


@dataclass
class ResultRow:
    """One (protocol, axis value) point of a sweep"""
    protocol: str
    axis: str
    axis_value: float
    n_r: int | None = None
    mlr_analysis: float | None = None
    mlr_sim: float | None = None
    mlr_sim_stderr: float | None = None
    rdc_analysis: float | None = None
    rdc_sim: float | None = None
    optimal: bool = False
    seed: int | None = None
    replications: int = 0
    error: str = ''

    def to_dict(self):
        return {k: _json_value(v) for k, v in asdict(self).items()}


def _blank(value):
    return value is None or (isinstance(value, float) and math.isnan(value))


def _csv_value(value):
    if _blank(value):
        return ''
    if isinstance(value, bool):
        return '1' if value else '0'
    if isinstance(value, float):
        return format(value, '.10g')
    return str(value)


def _json_value(value):
    return None if _blank(value) else value


def rows_to_csv(rows):
    """CSV text with a schema tag line, a header row and one line per row"""
    output = io.StringIO()
    output.write(f"# schema: {Config.CSV_SCHEMA}\n")
    writer = csv.writer(output, lineterminator='\n')

    # Write header
    writer.writerow(CSV_COLUMNS)

    # Write data
    for row in rows:
        writer.writerow([_csv_value(getattr(row, name)) for name in CSV_COLUMNS])

    return output.getvalue()


def rows_to_json(rows):
    return dump_json({'schema': Config.CSV_SCHEMA, 'rows': [row.to_dict() for row in rows]})


def render_rows(rows, fmt):
    if fmt == 'json':
        return rows_to_json(rows)
    return rows_to_csv(rows)


def parse_csv(text):
    """Read rows back from rows_to_csv output"""
    lines = text.splitlines()
    if not lines or not lines[0].startswith('# schema:'):
        raise ValueError('missing schema line')
    reader = csv.DictReader(lines[1:])
    names = {f.name for f in fields(ResultRow)}
    return [{k: v for k, v in record.items() if k in names} for record in reader]


def metrics_to_csv(documents):
    """Flat CSV of simulation metric documents, one per replication"""
    output = io.StringIO()
    writer = csv.writer(output, lineterminator='\n')
    columns = [k for k, v in documents[0].items() if not isinstance(v, (list, dict))] if documents else []
    output.write(f"# schema: {Config.CSV_SCHEMA}\n")
    writer.writerow(columns)
    for doc in documents:
        writer.writerow([_csv_value(doc[k]) for k in columns])
    return output.getvalue()


def write_output(text, path=None):
    """Write to path, or stdout when path is None or '-'"""
    if path in (None, '-'):
        print(text, end='' if text.endswith('\n') else '\n')
        return
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        fh.write(text)
