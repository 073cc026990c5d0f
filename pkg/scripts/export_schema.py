"""Write the experiment-config JSON schema to docs/config.schema.json."""
from pathlib import Path

from roadrti.config import SCHEMA
from roadrti.io import write_json

if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "docs" / "config.schema.json"
    write_json(out, SCHEMA)
    print(out)
