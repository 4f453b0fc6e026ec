#!/usr/bin/env python3
"""Train the small MNIST CNN fixture once and export it.

Writes, into --out (default tests/data):
  mnist_cnn.lgtw        trained weights + architecture manifest
  mnist_test1000.lgtd   1000 held-out samples (100 per class)
  mnist_reference.json  torch logits for the first 10 samples, torch top-1
  mnist_cnn.pt          the torch state dict

The MNIST digits come from the 5000-sample subset bundled with mlxtend
(mlxtend/data/data/mnist_5k.csv.gz); pass --csv to point at a copy of it.
The encoders below are written independently of the C++ container code.
"""

import argparse
import gzip
import json
import pathlib
import struct
import zlib

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

ROLE = {"weight": 0, "bias": 1}
TAG_INPUT, TAG_DENSE, TAG_CONV, TAG_RELU, TAG_POOL, TAG_FLATTEN = 0x01, 0x10, 0x11, 0x12, 0x13, 0x14


class Net(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 16, 4)
        self.conv2 = nn.Conv2d(16, 32, 4)
        self.fc1 = nn.Linear(512, 64)
        self.fc2 = nn.Linear(64, 10)

    def forward(self, x):
        x = F.max_pool2d(F.relu(self.conv1(x)), 2)
        x = F.max_pool2d(F.relu(self.conv2(x)), 2)
        x = F.dropout(x.flatten(1), 0.3, self.training)
        x = F.dropout(F.relu(self.fc1(x)), 0.3, self.training)
        return self.fc2(x)


def str16(s):
    b = s.encode()
    return struct.pack("<H", len(b)) + b


def shape_bytes(shape):
    return struct.pack("<B", len(shape)) + b"".join(struct.pack("<I", d) for d in shape)


def record(tag, value):
    return struct.pack("<BI", tag, len(value)) + value


def manifest_bytes():
    body = record(TAG_INPUT, shape_bytes([1, 28, 28]))
    body += record(TAG_CONV, struct.pack("<6I", 1, 16, 4, 4, 1, 0) + str16("conv1.weight") + str16("conv1.bias"))
    body += record(TAG_RELU, b"") + record(TAG_POOL, struct.pack("<2I", 2, 2))
    body += record(TAG_CONV, struct.pack("<6I", 16, 32, 4, 4, 1, 0) + str16("conv2.weight") + str16("conv2.bias"))
    body += record(TAG_RELU, b"") + record(TAG_POOL, struct.pack("<2I", 2, 2))
    body += record(TAG_FLATTEN, b"")
    body += record(TAG_DENSE, struct.pack("<2I", 512, 64) + str16("fc1.weight") + str16("fc1.bias"))
    body += record(TAG_RELU, b"")
    body += record(TAG_DENSE, struct.pack("<2I", 64, 10) + str16("fc2.weight") + str16("fc2.bias"))
    return struct.pack("<I", len(body)) + body


def encode_lgtw(state):
    out = b"LGTW" + struct.pack("<HI", 1, len(state))
    for name, tensor in state.items():
        arr = tensor.detach().cpu().numpy().astype("<f4")
        role = ROLE[name.rsplit(".", 1)[1]]
        out += str16(name) + struct.pack("<BB", role, 0) + shape_bytes(arr.shape) + arr.tobytes()
    out += manifest_bytes()
    return out + struct.pack("<I", zlib.crc32(out))


def encode_lgtd(x, y, num_classes):
    out = b"LGTD" + struct.pack("<HII", 1, len(y), num_classes) + shape_bytes(x.shape[1:])
    out += x.astype("<f4").tobytes() + y.astype("<u4").tobytes()
    return out + struct.pack("<I", zlib.crc32(out))


def split(labels, per_class_test, rng):
    test, train = [], []
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        test += list(idx[:per_class_test])
        train += list(idx[per_class_test:])
    return np.array(train), np.array(test)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--csv", default=None, help="defaults to the copy inside an installed mlxtend")
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"))
    ap.add_argument("--epochs", type=int, default=25)
    args = ap.parse_args()

    torch.manual_seed(0)
    torch.set_num_threads(1)
    if args.csv is None:
        import mlxtend.data
        args.csv = pathlib.Path(mlxtend.data.__file__).parent / "data" / "mnist_5k.csv.gz"
    raw = np.loadtxt(gzip.open(args.csv), delimiter=",")
    images = (raw[:, :-1] / 255.0).astype(np.float32).reshape(-1, 1, 28, 28)
    labels = raw[:, -1].astype(np.int64)
    train, test = split(labels, 100, np.random.default_rng(0))
    # Interleave classes so the first reference samples are not all zeros.
    test = test.reshape(10, 100).T.reshape(-1)

    xtr, ytr = torch.tensor(images[train]), torch.tensor(labels[train])
    shift_rng = np.random.default_rng(1)
    model = Net()
    opt = torch.optim.Adam(model.parameters(), 1e-3)
    for epoch in range(args.epochs):
        model.train()
        perm = torch.randperm(len(xtr))
        for i in range(0, len(perm), 64):
            b = perm[i:i + 64]
            dy, dx = shift_rng.integers(-2, 3, 2)
            xb = torch.roll(xtr[b], (int(dy), int(dx)), (2, 3))
            opt.zero_grad()
            F.cross_entropy(model(xb), ytr[b]).backward()
            opt.step()

    model.eval()
    xte, yte = images[test], labels[test]
    with torch.no_grad():
        logits = model(torch.tensor(xte)).numpy()
    pred = logits.argmax(1)
    correct = int((pred == yte).sum())
    print(f"torch top-1 on {len(yte)} held-out samples: {100.0 * correct / len(yte):.2f}%")

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    state = {k: v for k, v in model.state_dict().items()}
    (out / "mnist_cnn.lgtw").write_bytes(encode_lgtw(state))
    (out / "mnist_test1000.lgtd").write_bytes(encode_lgtd(xte, yte, 10))
    torch.save(state, out / "mnist_cnn.pt")
    ref = {
        "samples": list(range(10)),
        "logits": [[float(v) for v in row] for row in logits[:10]],
        "labels": [int(v) for v in yte[:10]],
        "correct": correct,
        "count": int(len(yte)),
        "accuracy": 100.0 * correct / len(yte),
    }
    (out / "mnist_reference.json").write_text(json.dumps(ref, indent=1) + "\n")


if __name__ == "__main__":
    main()
