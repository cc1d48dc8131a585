"""Regenerates tests/data/tiny_net.onnx and its reference pooled features.

The network is a small random conv stack exposing four named outputs that
stand in for the pool1 / pool2 / pre_aux / pool3 taps of a real feature
extractor. Reference features are the global spatial means of each output
for a deterministic 299x299 input.
"""
import json
import pathlib

import torch
import torch.nn as nn
import torch.nn.functional as F

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"


class Tiny(nn.Module):
    def __init__(self):
        super().__init__()
        self.c1 = nn.Conv2d(3, 4, 3, stride=2)
        self.c2 = nn.Conv2d(4, 6, 3, stride=2)
        self.c3 = nn.Conv2d(6, 8, 3, stride=2)
        self.c4 = nn.Conv2d(8, 10, 3, stride=2)

    def forward(self, x):
        a = F.max_pool2d(torch.relu(self.c1(x)), 2)
        b = F.max_pool2d(torch.relu(self.c2(a)), 2)
        c = torch.relu(self.c3(b))
        d = F.adaptive_avg_pool2d(torch.relu(self.c4(c)), 1)
        return a, b, c, d


def probe_input():
    h = torch.arange(299).view(299, 1, 1)
    w = torch.arange(299).view(1, 299, 1)
    c = torch.arange(3).view(1, 1, 3)
    pix = (h * 7 + w * 13 + c * 29) % 256
    hwc = pix.to(torch.float32) / 127.5 - 1.0
    return hwc.permute(2, 0, 1).unsqueeze(0)


def main():
    torch.manual_seed(0)
    net = Tiny().eval()
    x = probe_input()
    torch.onnx.export(net, x, str(OUT / "tiny_net.onnx"), input_names=["input"],
                      output_names=["pool1", "pool2", "pre_aux", "pool3"],
                      opset_version=11, dynamo=False)
    with torch.no_grad():
        outs = net(x)
    ref = {name: o.mean(dim=(2, 3)).squeeze(0).tolist()
           for name, o in zip(["pool1", "pool2", "pre_aux", "pool3"], outs)}
    (OUT / "tiny_net_reference.json").write_text(json.dumps(ref, indent=1) + "\n")


if __name__ == "__main__":
    main()
