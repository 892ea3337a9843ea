"""Training schedule math and compute/energy/carbon/cost estimates.

Compute uses the dense-transformer approximations: training costs
6 * params * tokens FLOPs and a prefill pass costs 2 * params * tokens.
Time figures are lower bounds at peak throughput; latency is the
memory-bound minimum (weights / bandwidth).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from urducorpus.errors import InvalidParameter, OutOfRange

logger = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600.0
JOULES_PER_KWH = 3.6e6


def _require_positive(obj, names):
    for name in names:
        value = getattr(obj, name)
        if not value > 0:
            raise InvalidParameter(f"{type(obj).__name__}.{name} must be positive, got {value}")


@dataclass(frozen=True)
class ModelShape:
    n_params: int
    n_layers: int
    d_model: int
    n_heads: int
    d_head: int
    n_ctx: int
    vocab_size: int
    weight_params: int = 0
    bytes_per_param: float = 0.0

    def __post_init__(self):
        # n_heads * d_head is not required to equal d_model
        _require_positive(self, ('n_params', 'n_layers', 'd_model', 'n_heads', 'd_head', 'n_ctx',
                                 'vocab_size'))
        if self.weight_params < 0 or self.bytes_per_param < 0:
            raise InvalidParameter("weight_params and bytes_per_param must not be negative")

    @property
    def resident_params(self):
        """Parameters read per forward pass; defaults to n_params"""
        return self.weight_params or self.n_params


@dataclass(frozen=True)
class TrainPlan:
    peak_lr: float = 6.0e-4
    min_lr_ratio: float = 0.1
    warmup_tokens: int = 171_000_000
    total_tokens: int = 8_550_000_000
    batch_tokens: int = 500_000
    epochs: int = 3
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    grad_clip_norm: float = 1.0
    micro_batch_seqs: int = 8
    data_parallel: int = 4

    def __post_init__(self):
        _require_positive(self, ('peak_lr', 'total_tokens', 'batch_tokens', 'epochs', 'eps',
                                 'grad_clip_norm', 'micro_batch_seqs', 'data_parallel'))
        if not 0 < self.min_lr_ratio < 1:
            raise InvalidParameter(f"min_lr_ratio must be in (0, 1), got {self.min_lr_ratio}")
        if not 0 <= self.warmup_tokens < self.total_tokens:
            raise InvalidParameter("warmup_tokens must be below total_tokens")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidParameter("Adam betas must be in [0, 1)")

    @property
    def min_lr(self):
        return self.min_lr_ratio * self.peak_lr

    @property
    def tokens_per_epoch(self):
        return self.total_tokens / self.epochs


@dataclass(frozen=True)
class HardwareProfile:
    gpu_count: int
    peak_tflops: float
    power_per_gpu_w: float = 300.0
    node_power_factor: float = 2.0
    mem_bandwidth_gb_s: float = 900.0
    bytes_per_param: float = 4.0
    price_per_gpu_hour: float = 1.0
    grid_kg_co2_per_kwh: float = 0.4
    gpu_name: str = 'NVIDIA V100 (32 GB)'
    currency: str = 'USD'

    def __post_init__(self):
        _require_positive(self, ('gpu_count', 'peak_tflops', 'power_per_gpu_w', 'node_power_factor',
                                 'mem_bandwidth_gb_s', 'bytes_per_param', 'price_per_gpu_hour',
                                 'grid_kg_co2_per_kwh'))


HARDWARE_PRESETS = {
    # four-GPU pretraining node; energy counts GPU draw only
    'table3': HardwareProfile(gpu_count=4, peak_tflops=112.0, power_per_gpu_w=300.0,
                              node_power_factor=1.0, mem_bandwidth_gb_s=900.0, bytes_per_param=4.0,
                              price_per_gpu_hour=0.35, grid_kg_co2_per_kwh=0.4, currency='USD'),
    # single GPU for fine-tuning/inference comparisons; energy doubled for the host
    'appendix': HardwareProfile(gpu_count=1, peak_tflops=112.0, power_per_gpu_w=300.0,
                                node_power_factor=2.0, mem_bandwidth_gb_s=900.0, bytes_per_param=4.0,
                                price_per_gpu_hour=21.0, grid_kg_co2_per_kwh=0.485, currency='PKR'),
}

MODEL_PRESETS = {
    'urdulm-100m-10k': ModelShape(100_000_000, 12, 768, 12, 64, 1024, 10_000),
    'urdulm-100m-20k': ModelShape(116_000_000, 12, 768, 16, 64, 1024, 20_000),
    'urdulm-100m-32k': ModelShape(134_000_000, 12, 768, 16, 64, 1024, 32_000),
    'llama-3.2-3b': ModelShape(3_210_000_000, 28, 3072, 24, 128, 131_072, 128_256,
                               weight_params=3_240_000_000, bytes_per_param=2.0),
}

PLAN_PRESETS = {
    'urdulm-pretrain': TrainPlan(),
}


@dataclass
class GradAccumPlan:
    total_steps: int
    steps_per_rank: int
    data_parallel: int
    effective_sequences: int
    effective_tokens: int


@dataclass
class Estimates:
    flops: float = 0.0
    wall_hours: float = 0.0
    energy_kwh: float = 0.0
    co2_kg: float = 0.0
    cost: float = 0.0
    latency_ms: float = 0.0
    energy_j: float = 0.0
    currency: str = 'USD'

    def to_dict(self):
        return {
            'flops': self.flops,
            'wall_hours': self.wall_hours,
            'energy_kwh': self.energy_kwh,
            'co2_kg': self.co2_kg,
            'cost': self.cost,
            'latency_ms': self.latency_ms,
            'energy_j': self.energy_j,
            'currency': self.currency,
        }


def lr_at(tokens_seen, plan):
    """Linear warmup to peak, then cosine decay to min_lr_ratio * peak"""
    if not 0 <= tokens_seen <= plan.total_tokens:
        raise OutOfRange(f"tokens_seen {tokens_seen} outside [0, {plan.total_tokens}]")
    if tokens_seen <= plan.warmup_tokens:
        if plan.warmup_tokens == 0:
            return plan.peak_lr
        return plan.peak_lr * (tokens_seen / plan.warmup_tokens)
    progress = (tokens_seen - plan.warmup_tokens) / (plan.total_tokens - plan.warmup_tokens)
    if progress >= 1.0:
        return plan.min_lr
    return plan.min_lr + 0.5 * (plan.peak_lr - plan.min_lr) * (1.0 + math.cos(math.pi * progress))


def lr_curve(plan, points=1001):
    """(tokens, lr) samples across the whole run, endpoints included"""
    if points < 2:
        raise InvalidParameter(f"need at least 2 points, got {points}")
    tokens = np.linspace(0, plan.total_tokens, points)
    return [(float(t), lr_at(min(float(t), plan.total_tokens), plan)) for t in tokens]


def training_flops(n_params, tokens):
    return 6.0 * n_params * tokens


def inference_prefill_flops(n_params, prompt_tokens):
    return 2.0 * n_params * prompt_tokens


def memory_bound_latency(n_params, bytes_per_param, bandwidth_gb_s):
    """Milliseconds to stream every weight once from device memory"""
    if bandwidth_gb_s <= 0:
        raise InvalidParameter(f"bandwidth must be positive, got {bandwidth_gb_s}")
    return n_params * bytes_per_param / (bandwidth_gb_s * 1e9) * 1e3


def wall_time_lower_bound(flops, profile):
    return flops / (profile.gpu_count * profile.peak_tflops * 1e12) / SECONDS_PER_HOUR


def energy_and_carbon(hours, profile):
    kwh = hours * profile.gpu_count * profile.power_per_gpu_w * profile.node_power_factor / 1000.0
    return kwh, kwh * profile.grid_kg_co2_per_kwh


def inference_energy(latency_ms, profile):
    return latency_ms / 1000.0 * profile.power_per_gpu_w


def training_cost(hours, profile):
    return hours * profile.gpu_count * profile.price_per_gpu_hour


def inference_cost_per_1k(latency_ms, profile):
    """Cost of 1000 prompt passes on one GPU"""
    # 1000 passes of latency_ms milliseconds take latency_ms seconds
    return latency_ms / SECONDS_PER_HOUR * profile.price_per_gpu_hour


def grad_accum_plan(batch_tokens, n_ctx, micro_batch_seqs, data_parallel=1):
    if micro_batch_seqs < 1:
        raise InvalidParameter(f"micro_batch_seqs must be >= 1, got {micro_batch_seqs}")
    if n_ctx < 1 or data_parallel < 1 or batch_tokens <= 0:
        raise InvalidParameter("batch_tokens, n_ctx and data_parallel must be positive")
    total = math.ceil(batch_tokens / (n_ctx * micro_batch_seqs))
    per_rank = math.ceil(total / data_parallel)
    sequences = per_rank * data_parallel * micro_batch_seqs
    return GradAccumPlan(total, per_rank, data_parallel, sequences, sequences * n_ctx)


def steps_per_epoch(tokens_per_epoch, batch_tokens):
    return math.ceil(tokens_per_epoch / batch_tokens)


def embedding_params(vocab_size, d_model):
    return vocab_size * d_model


def tokenizer_tax(tokens_a, tokens_b):
    """How many times more tokens tokenizer A needs than B for the same text"""
    if tokens_b <= 0:
        raise InvalidParameter("reference token count must be positive")
    return tokens_a / tokens_b


def corpus_size_target_gb(speakers_millions, gb_per_million=0.14):
    """Rough pretraining corpus size for a language with this many speakers"""
    return speakers_millions * gb_per_million


def _bytes_per_param(shape, profile):
    return shape.bytes_per_param or profile.bytes_per_param


def estimate_finetune(shape, tokens, profile):
    flops = training_flops(shape.n_params, tokens)
    hours = wall_time_lower_bound(flops, profile)
    kwh, co2 = energy_and_carbon(hours, profile)
    return Estimates(flops=flops, wall_hours=hours, energy_kwh=kwh, co2_kg=co2,
                     cost=training_cost(hours, profile), energy_j=kwh * JOULES_PER_KWH,
                     currency=profile.currency)


def estimate_inference(shape, prompt_tokens, profile):
    latency = memory_bound_latency(shape.resident_params, _bytes_per_param(shape, profile),
                                   profile.mem_bandwidth_gb_s)
    return Estimates(flops=inference_prefill_flops(shape.n_params, prompt_tokens),
                     wall_hours=latency / 1000.0 / SECONDS_PER_HOUR,
                     latency_ms=latency, energy_j=inference_energy(latency, profile),
                     cost=inference_cost_per_1k(latency, profile), currency=profile.currency)


def estimate_training(shape, plan, profile, measured_hours=None):
    """Whole pretraining run; measured_hours replaces the peak-throughput bound"""
    flops = training_flops(shape.n_params, plan.total_tokens)
    hours = measured_hours if measured_hours is not None else wall_time_lower_bound(flops, profile)
    kwh, co2 = energy_and_carbon(hours, profile)
    return Estimates(flops=flops, wall_hours=hours, energy_kwh=kwh, co2_kg=co2,
                     cost=training_cost(hours, profile), energy_j=kwh * JOULES_PER_KWH,
                     currency=profile.currency)


def _si(value, unit):
    for scale, prefix in ((1e18, 'E'), (1e15, 'P'), (1e12, 'T'), (1e9, 'G'), (1e6, 'M')):
        if abs(value) >= scale:
            return f"{value / scale:.2f} {prefix}{unit}"
    return f"{value:.2f} {unit}"


def training_summary(shape, plan, profile, measured_hours=None):
    """(label, value) rows laid out like a training resource table"""
    estimates = estimate_training(shape, plan, profile, measured_hours)
    accum = grad_accum_plan(plan.batch_tokens, shape.n_ctx, plan.micro_batch_seqs, plan.data_parallel)
    per_step = training_flops(shape.n_params, plan.batch_tokens)
    per_epoch = training_flops(shape.n_params, plan.tokens_per_epoch)
    hours_label = 'Total training time' if measured_hours is not None else 'Total training time (lower bound)'
    return [
        ('Model size', f"{shape.n_params / 1e6:.0f}M parameters"),
        ('Token sequence length', str(shape.n_ctx)),
        ('Batch size (effective)',
         f"{accum.effective_sequences} samples ~ {accum.effective_tokens / 1e6:.2f}M tokens"),
        ('Gradient accumulation steps', f"{accum.steps_per_rank} per rank x {accum.data_parallel} ranks"),
        ('FLOPs per step', _si(per_step, 'FLOPs')),
        ('Total compute per epoch', _si(per_epoch, 'FLOPs')),
        (f'Total compute ({plan.epochs} epochs)', _si(estimates.flops, 'FLOPs')),
        ('GPU type', f"{profile.gpu_count} x {profile.gpu_name}"),
        ('Power consumption per GPU', f"{profile.power_per_gpu_w:.0f} W"),
        ('Training time per epoch', f"{estimates.wall_hours / plan.epochs:.2f} hours"),
        (hours_label, f"{estimates.wall_hours:.2f} hours ({plan.epochs} epochs)"),
        ('Total energy', f"{estimates.energy_kwh:.2f} kWh"),
        ('Estimated carbon footprint',
         f"{estimates.co2_kg:.2f} kg CO2 (at {profile.grid_kg_co2_per_kwh} kg/kWh)"),
        ('Estimated cost', f"{estimates.cost:.2f} {profile.currency}"),
    ]
