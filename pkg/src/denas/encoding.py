"""Codec between CNN layer descriptions and 2-byte address values.

One network layer is stored as a single integer in [0, 8191]. That space is
split into three contiguous subnets, one per layer type; the offset inside a
subnet packs the layer's attributes into fixed-width bit fields, each storing
``attribute - 1`` so the all-zero offset is the all-minimum layer. The pooling
payload needs only 5 bits, so 6 placeholder bits (the high bits of its 11-bit
offset) pad it to the width of the fully-connected subnet, equalizing the odds
of a random value landing on either layer type. Placeholder bits are written
as zero and ignored on decode.

Values render as dotted two-byte text ("2.125") for logs and persisted
genomes: high byte, dot, low byte, both plain decimal.
"""

import re
from dataclasses import dataclass
from enum import IntEnum

MAX_VALUE = 8191  # 13 usable bits; valid addresses span 0.0-31.255

# conv payload, MSB to LSB
_FILTER_BITS = 3
_MAPS_BITS = 7
_STRIDE_BITS = 2
# pool payload, MSB to LSB (below the placeholder)
_KERNEL_BITS = 2
_POOL_STRIDE_BITS = 2
_TYPE_BITS = 1


class PoolType(IntEnum):
    MAX = 1
    AVERAGE = 2


@dataclass(frozen=True)
class ConvLayer:
    filter_size: int   # pixels, [1, 8]
    feature_maps: int  # [1, 128]
    stride: int        # pixels, [1, 4]


@dataclass(frozen=True)
class PoolLayer:
    kernel_size: int   # pixels, [1, 4]
    stride: int        # pixels, [1, 4]
    pool_type: PoolType


@dataclass(frozen=True)
class FullyConnectedLayer:
    neurons: int  # [1, 2048]


LayerGene = ConvLayer | PoolLayer | FullyConnectedLayer


@dataclass(frozen=True)
class Subnet:
    """Contiguous address range owned by one layer type."""

    layer_type: type
    base_value: int
    payload_bits: int
    placeholder_bits: int

    @property
    def span(self) -> int:
        return 1 << (self.payload_bits + self.placeholder_bits)

    @property
    def last_value(self) -> int:
        return self.base_value + self.span - 1

    def __contains__(self, value: int) -> bool:
        return self.base_value <= value <= self.last_value


CONV_SUBNET = Subnet(ConvLayer, 0, 12, 0)            # 0.0-15.255
FC_SUBNET = Subnet(FullyConnectedLayer, 4096, 11, 0)  # 16.0-23.255
POOL_SUBNET = Subnet(PoolLayer, 6144, 5, 6)           # 24.0-31.255
SUBNETS = (CONV_SUBNET, FC_SUBNET, POOL_SUBNET)


def _check_range(attribute: str, value: int, lo: int, hi: int) -> None:
    if not isinstance(value, (int,)) or isinstance(value, bool):
        raise ValueError(f"{attribute} must be an integer, got {value!r}")
    if not lo <= value <= hi:
        raise ValueError(f"{attribute}={value} outside [{lo}, {hi}]")


def encode_layer(gene: LayerGene) -> int:
    """Pack a layer description into its canonical address value."""
    if isinstance(gene, ConvLayer):
        _check_range("filter_size", gene.filter_size, 1, 8)
        _check_range("feature_maps", gene.feature_maps, 1, 128)
        _check_range("stride", gene.stride, 1, 4)
        offset = ((gene.filter_size - 1) << (_MAPS_BITS + _STRIDE_BITS)
                  | (gene.feature_maps - 1) << _STRIDE_BITS
                  | (gene.stride - 1))
        return CONV_SUBNET.base_value + offset
    if isinstance(gene, PoolLayer):
        _check_range("kernel_size", gene.kernel_size, 1, 4)
        _check_range("stride", gene.stride, 1, 4)
        _check_range("pool_type", int(gene.pool_type), 1, 2)
        offset = ((gene.kernel_size - 1) << (_POOL_STRIDE_BITS + _TYPE_BITS)
                  | (gene.stride - 1) << _TYPE_BITS
                  | (int(gene.pool_type) - 1))
        return POOL_SUBNET.base_value + offset  # placeholder bits stay zero
    if isinstance(gene, FullyConnectedLayer):
        _check_range("neurons", gene.neurons, 1, 2048)
        return FC_SUBNET.base_value + (gene.neurons - 1)
    raise TypeError(f"not a layer gene: {gene!r}")


def subnet_of(value: int) -> Subnet:
    """Return the unique subnet owning an address value."""
    if not 0 <= value <= MAX_VALUE:
        raise ValueError(f"address value {value} outside [0, {MAX_VALUE}]")
    for subnet in SUBNETS:
        if value in subnet:
            return subnet
    raise AssertionError("subnets no longer partition the address space")


def decode_interface(value: int) -> LayerGene:
    """Unpack an address value into the layer it names."""
    subnet = subnet_of(value)
    offset = value - subnet.base_value
    if subnet is CONV_SUBNET:
        return ConvLayer(
            filter_size=(offset >> (_MAPS_BITS + _STRIDE_BITS)) + 1,
            feature_maps=((offset >> _STRIDE_BITS) & ((1 << _MAPS_BITS) - 1)) + 1,
            stride=(offset & ((1 << _STRIDE_BITS) - 1)) + 1,
        )
    if subnet is POOL_SUBNET:
        payload = offset & ((1 << POOL_SUBNET.payload_bits) - 1)  # drop placeholder
        return PoolLayer(
            kernel_size=((payload >> (_POOL_STRIDE_BITS + _TYPE_BITS)) & 0b11) + 1,
            stride=((payload >> _TYPE_BITS) & 0b11) + 1,
            pool_type=PoolType((payload & 0b1) + 1),
        )
    return FullyConnectedLayer(neurons=offset + 1)


def canonicalize(value: int) -> int:
    """Re-encode a value's layer; clears pooling placeholder bits."""
    return encode_layer(decode_interface(value))


def format_ip(value: int) -> str:
    """Dotted two-byte text of a value, e.g. 5119 -> "19.255"."""
    if not 0 <= value <= MAX_VALUE:
        raise ValueError(f"address value {value} outside [0, {MAX_VALUE}]")
    return f"{value >> 8}.{value & 0xFF}"


def parse_ip(text: str) -> int:
    """Exact inverse of format_ip."""
    match = re.fullmatch(r"(\d{1,3})\.(\d{1,3})", text.strip())
    if match is None:
        raise ValueError(f"malformed address text: {text!r}")
    high, low = int(match.group(1)), int(match.group(2))
    if high > 255 or low > 255:
        raise ValueError(f"byte out of range in address text: {text!r}")
    value = (high << 8) | low
    if value > MAX_VALUE:
        raise ValueError(f"address {text!r} beyond the valid range (31.255)")
    return value


_LAYER_TEXT = re.compile(r"(conv|pool|fc)\((.*)\)")


def format_layer(gene: LayerGene) -> str:
    """Human-readable layer text, e.g. "conv(filter=5,maps=32,stride=1)"."""
    if isinstance(gene, ConvLayer):
        return f"conv(filter={gene.filter_size},maps={gene.feature_maps},stride={gene.stride})"
    if isinstance(gene, PoolLayer):
        kind = "max" if gene.pool_type == PoolType.MAX else "avg"
        return f"pool(kernel={gene.kernel_size},stride={gene.stride},type={kind})"
    if isinstance(gene, FullyConnectedLayer):
        return f"fc(neurons={gene.neurons})"
    raise TypeError(f"not a layer gene: {gene!r}")


def parse_layer(text: str) -> LayerGene:
    """Inverse of format_layer."""
    match = _LAYER_TEXT.fullmatch(text.strip().lower())
    if match is None:
        raise ValueError(f"malformed layer text: {text!r}")
    kind, body = match.groups()
    fields = {}
    for part in body.split(","):
        key, _, raw = part.partition("=")
        if not raw:
            raise ValueError(f"malformed layer field {part!r} in {text!r}")
        fields[key.strip()] = raw.strip()
    try:
        if kind == "conv":
            return ConvLayer(filter_size=int(fields.pop("filter")),
                             feature_maps=int(fields.pop("maps")),
                             stride=int(fields.pop("stride")))
        if kind == "pool":
            kinds = {"max": PoolType.MAX, "avg": PoolType.AVERAGE,
                     "average": PoolType.AVERAGE, "1": PoolType.MAX, "2": PoolType.AVERAGE}
            pool_type = kinds.get(fields.pop("type", "max"))
            if pool_type is None:
                raise KeyError("type")
            return PoolLayer(kernel_size=int(fields.pop("kernel")),
                             stride=int(fields.pop("stride")), pool_type=pool_type)
        return FullyConnectedLayer(neurons=int(fields.pop("neurons")))
    except KeyError as missing:
        raise ValueError(f"layer text {text!r} missing field {missing}") from None
