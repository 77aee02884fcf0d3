import sys


def read_sequence(stream=sys.stdin):
    parts = []
    for line in stream:
        line = line.strip()
        if line and not line.startswith(">"):
            parts.append(line.upper())
    return "".join(parts)


def write_report(pairs, stream=sys.stdout):
    for key, value in pairs:
        stream.write(f"{key} {value}\n")
