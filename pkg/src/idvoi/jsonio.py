"""The one JSON rendering used everywhere bytes must agree."""

import json


def canonical_json(obj) -> str:
    """CLI output, HTTP bodies, and cached reports all use this rendering,
    so identical inputs produce identical bytes everywhere."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
