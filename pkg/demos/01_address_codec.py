"""Tour of the layer-address codec.

Every network layer lives in a 2-byte address: the subnet picks the layer
type, the offset packs the attributes. Run me with python; no arguments.
"""

from denas import (
    ConvLayer,
    FullyConnectedLayer,
    PoolLayer,
    PoolType,
    canonicalize,
    decode_interface,
    encode_layer,
    format_ip,
    format_layer,
    parse_ip,
    subnet_of,
)

print("Three subnets partition [0, 8191]:")
for value in (0, 4095, 4096, 6143, 6144, 8191):
    subnet = subnet_of(value)
    print(f"  {format_ip(value):>8}  ({value:4d})  ->  {subnet.layer_type.__name__}")

print("\nEncoding a convolutional layer (filter 2, 32 maps, stride 2):")
gene = ConvLayer(filter_size=2, feature_maps=32, stride=2)
value = encode_layer(gene)
print(f"  {format_layer(gene)}")
print(f"  bit fields: filter-1={gene.filter_size - 1:03b} maps-1={gene.feature_maps - 1:07b} "
      f"stride-1={gene.stride - 1:02b}")
print(f"  packed value {value} = address {format_ip(value)}")
assert decode_interface(value) == gene

print("\nEvery attribute stores value-1, so the all-minimum layer is the subnet base:")
print(f"  {format_layer(decode_interface(0))} at 0.0")
print(f"  {format_layer(decode_interface(4096))} at 16.0")
print(f"  {format_layer(decode_interface(6144))} at 24.0")

print("\nPooling payloads use 5 bits plus 6 placeholder bits; the placeholder is")
print("ignored on decode and cleared by canonicalization:")
raw = 6144 + 0b10000_010010  # placeholder bits set
gene = decode_interface(raw)
print(f"  raw {raw} decodes to {format_layer(gene)}")
print(f"  canonicalize({raw}) = {canonicalize(raw)} = encode({format_layer(gene)})")

print("\nAddresses roundtrip through dotted text:")
for text in ("2.125", "19.255", "24.18"):
    print(f"  {text} -> {parse_ip(text)} -> {format_layer(decode_interface(parse_ip(text)))}")

print("\nA genome is just a list of addresses; this one is a classic stack:")
stack = [ConvLayer(5, 6, 1), PoolLayer(2, 2, PoolType.MAX),
         ConvLayer(5, 16, 1), PoolLayer(2, 2, PoolType.MAX), FullyConnectedLayer(120)]
print(" ", " ".join(format_ip(encode_layer(g)) for g in stack))
