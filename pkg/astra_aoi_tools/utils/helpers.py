import csv
import hashlib
import json
import os
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from astra_aoi_tools.utils.models import Action, IDLE, SystemConfig

TOOL_VERSION = "0.3.0"


def action_set(D, R):
    """
    Builds the access action set: the idle action plus every (d, q) with
    d in 1..D and q in 1..R.

    Args:
        D (int): Maximum replicas per selected pool
        R (int): Number of resource pools

    Returns:
        list: Actions sorted by (energy, d, q), idle first
    """
    actions = [IDLE] + [Action(d=d, q=q) for d in range(1, D + 1) for q in range(1, R + 1)]
    return sorted(actions, key=Action.sort_key)


def parse_action(text):
    """
    Parses an action written as "d,q", "(d,q)" or "dxq".

    Args:
        text (str): Text form of the action

    Returns:
        Action: The parsed action
    """
    cleaned = text.strip().strip('()').replace('x', ',')
    parts = [p for p in cleaned.split(',') if p.strip()]
    if len(parts) != 2:
        raise ValueError(f"Cannot parse action from {text!r}")
    return Action(d=int(parts[0]), q=int(parts[1]))


def config_digest(cfg: SystemConfig):
    """
    Hashes the fields of a system configuration that influence the success law.

    Args:
        cfg (SystemConfig): Configuration to hash

    Returns:
        str: Hex SHA-256 digest (first 16 characters)
    """
    canonical = json.dumps(cfg.phy_dict(), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]


def spawn_rng(seed, *key):
    """
    Creates an independent generator for a (seed, key) pair.

    Streams depend only on the master seed and the key, never on the order in
    which they are requested, so parallel and serial runs draw identical numbers.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key)))


def format_float(value):
    """Shortest decimal text that round-trips the float exactly."""
    return repr(float(value))


def file_header(seed=None, cfg_digest=None, **extra):
    """
    Builds the comment lines that open every exported file.

    Returns:
        list: (key, value) pairs in output order
    """
    header = [('tool', f'astra-aoi-tools {TOOL_VERSION}')]
    if seed is not None:
        header.append(('seed', str(seed)))
    if cfg_digest is not None:
        header.append(('cfg_digest', cfg_digest))
    header.extend((k, str(v)) for k, v in extra.items())
    return header


def write_commented_csv(path, comments: Sequence[Tuple[str, str]], header: Sequence[str], rows: Iterable[Sequence]):
    """
    Writes a comma-separated file preceded by "# key=value" comment lines.

    Args:
        path (str): Output path
        comments (list): (key, value) pairs written as comment lines
        header (list): Column names
        rows (iterable): Data rows
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        for key, value in comments:
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def read_commented_csv(path) -> Tuple[Dict[str, str], List[str], List[List[str]]]:
    """
    Reads a file written by write_commented_csv.

    Returns:
        tuple: (comments dict, header list, data rows)
    """
    comments = {}
    with open(path, 'r', newline='', encoding='utf-8') as fh:
        lines = fh.read().splitlines()

    body = []
    for line in lines:
        if line.startswith('#'):
            key, _, value = line[1:].strip().partition('=')
            comments[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)

    if not body:
        return comments, [], []

    parsed = list(csv.reader(body))
    return comments, parsed[0], parsed[1:]
