"""Validate manifests against the published JSON schema."""
import json
import sys

import jsonschema
import yaml


def main(schema_path, *manifests):
    with open(schema_path) as f:
        schema = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    bad = 0
    for path in manifests:
        with open(path) as f:
            doc = yaml.safe_load(f)
        for err in validator.iter_errors(doc):
            print(f"{path}: {'/'.join(map(str, err.path))}: {err.message}")
            bad += 1
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
