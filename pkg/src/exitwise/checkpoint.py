"""Versioned textual checkpoints.

Layout: the header line `exitwise-ckpt v1`, five `key value` config lines,
then one block per tensor: `tensor <name> <rows> <cols>` followed by that
many rows of space-separated values printed at 17 significant digits, which
round-trips IEEE doubles bit-exactly.
"""

from __future__ import annotations

from .cascade import CascadeConfig, MultiExitNet
from .errors import CheckpointFormatError, CheckpointParseError

HEADER = "exitwise-ckpt v1"

_CONFIG_KEYS = ("input_dim", "exit_count", "hidden_width", "disc_width", "class_count")


def _tensors(net: MultiExitNet):
    for name, layer in net.named_layers():
        yield f"{name}.w", layer.w
        yield f"{name}.b", layer.b.reshape(1, -1)


def save_checkpoint(net: MultiExitNet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(HEADER + "\n")
        for key in _CONFIG_KEYS:
            fh.write(f"{key} {getattr(net.config, key)}\n")
        for name, tensor in _tensors(net):
            rows, cols = tensor.shape
            fh.write(f"tensor {name} {rows} {cols}\n")
            for row in tensor:
                fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_checkpoint(path) -> MultiExitNet:
    """Rebuild a network bit-for-bit from a checkpoint file.

    Momentum buffers are not serialized and come back zeroed.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != HEADER:
        found = lines[0] if lines else "<empty file>"
        raise CheckpointFormatError(f"expected header '{HEADER}', found '{found}'")

    pos = 1
    fields = {}
    for key in _CONFIG_KEYS:
        if pos >= len(lines):
            raise CheckpointParseError(f"truncated checkpoint: missing config key {key}")
        parts = lines[pos].split()
        if len(parts) != 2 or parts[0] != key:
            raise CheckpointParseError(f"line {pos + 1}: expected '{key} <value>'")
        try:
            fields[key] = int(parts[1])
        except ValueError as exc:
            raise CheckpointParseError(f"line {pos + 1}: {exc}") from exc
        pos += 1

    net = MultiExitNet(CascadeConfig(**fields), seed=0)
    for name, tensor in _tensors(net):
        if pos >= len(lines):
            raise CheckpointParseError(f"truncated checkpoint: missing tensor {name}")
        parts = lines[pos].split()
        if len(parts) != 4 or parts[0] != "tensor" or parts[1] != name:
            raise CheckpointParseError(f"line {pos + 1}: expected 'tensor {name} <rows> <cols>'")
        rows, cols = int(parts[2]), int(parts[3])
        if (rows, cols) != tensor.shape:
            raise CheckpointParseError(
                f"tensor {name}: stored shape ({rows}, {cols}) != expected {tensor.shape}"
            )
        pos += 1
        for r in range(rows):
            if pos >= len(lines):
                raise CheckpointParseError(f"truncated checkpoint inside tensor {name}")
            values = lines[pos].split()
            if len(values) != cols:
                raise CheckpointParseError(
                    f"line {pos + 1}: expected {cols} values, found {len(values)}"
                )
            try:
                tensor[r, :] = [float(v) for v in values]
            except ValueError as exc:
                raise CheckpointParseError(f"line {pos + 1}: {exc}") from exc
            pos += 1
    if pos != len(lines):
        raise CheckpointParseError(f"unexpected trailing content at line {pos + 1}")
    return net
