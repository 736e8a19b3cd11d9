"""Codec tests: hand bit-packing oracle, frozen examples, exhaustive roundtrip."""

import itertools

import pytest

from denas.encoding import (
    CONV_SUBNET,
    FC_SUBNET,
    MAX_VALUE,
    POOL_SUBNET,
    SUBNETS,
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
    parse_layer,
    subnet_of,
)


def oracle_encode(gene):
    """Independent encoder: concatenates binary strings instead of shifting."""
    if isinstance(gene, ConvLayer):
        bits = (format(gene.filter_size - 1, "03b")
                + format(gene.feature_maps - 1, "07b")
                + format(gene.stride - 1, "02b"))
        return 0 + int(bits, 2)
    if isinstance(gene, PoolLayer):
        bits = ("000000"  # placeholder, high 6 bits of the 11-bit offset
                + format(gene.kernel_size - 1, "02b")
                + format(gene.stride - 1, "02b")
                + format(int(gene.pool_type) - 1, "01b"))
        return 6144 + int(bits, 2)
    return 4096 + int(format(gene.neurons - 1, "011b"), 2)


def all_layer_genes():
    for f, m, s in itertools.product(range(1, 9), range(1, 129), range(1, 5)):
        yield ConvLayer(f, m, s)
    for k, s, t in itertools.product(range(1, 5), range(1, 5), (PoolType.MAX, PoolType.AVERAGE)):
        yield PoolLayer(k, s, t)
    for n in range(1, 2049):
        yield FullyConnectedLayer(n)


class TestEncodeExamples:
    def test_conv_hand_packed(self):
        # 001|0011111|01 = 637
        gene = ConvLayer(filter_size=2, feature_maps=32, stride=2)
        assert oracle_encode(gene) == 637
        assert encode_layer(gene) == 637
        assert format_ip(637) == "2.125"

    def test_all_minimum_conv_is_subnet_base(self):
        assert encode_layer(ConvLayer(1, 1, 1)) == 0
        assert format_ip(0) == "0.0"

    def test_fully_connected_hand_packed(self):
        assert encode_layer(FullyConnectedLayer(1024)) == 4096 + 1023 == 5119
        assert format_ip(5119) == "19.255"

    def test_pool_hand_packed(self):
        gene = PoolLayer(kernel_size=3, stride=2, pool_type=PoolType.MAX)
        assert oracle_encode(gene) == 6144 + 0b10010 == 6162
        assert encode_layer(gene) == 6162

    def test_out_of_range_names_attribute(self):
        with pytest.raises(ValueError, match="feature_maps"):
            encode_layer(ConvLayer(1, 129, 1))
        with pytest.raises(ValueError, match="kernel_size"):
            encode_layer(PoolLayer(5, 1, PoolType.MAX))
        with pytest.raises(ValueError, match="neurons"):
            encode_layer(FullyConnectedLayer(0))


class TestDecodeExamples:
    def test_conv_inverse(self):
        assert decode_interface(637) == ConvLayer(2, 32, 2)

    def test_fc_subnet_base_is_minimum_gene(self):
        assert decode_interface(4096) == FullyConnectedLayer(1)

    def test_top_of_pool_range_ignores_placeholder(self):
        assert decode_interface(8191) == PoolLayer(4, 4, PoolType.AVERAGE)

    def test_beyond_range_rejected(self):
        with pytest.raises(ValueError):
            decode_interface(8192)
        with pytest.raises(ValueError):
            decode_interface(-1)


class TestCanonicalize:
    def test_conv_values_already_canonical(self):
        assert canonicalize(637) == 637
        assert canonicalize(0) == 0

    def test_placeholder_bits_cleared(self):
        assert canonicalize(6144 + 0b10000010010) == 6162

    def test_idempotent_everywhere(self):
        for v in range(MAX_VALUE + 1):
            c = canonicalize(v)
            assert canonicalize(c) == c


class TestSubnets:
    def test_boundaries(self):
        assert subnet_of(4095) is CONV_SUBNET
        assert subnet_of(4096) is FC_SUBNET
        assert subnet_of(6143) is FC_SUBNET
        assert subnet_of(6144) is POOL_SUBNET

    def test_partition_no_gaps_or_overlaps(self):
        owners = [subnet_of(v) for v in range(MAX_VALUE + 1)]
        assert owners.count(CONV_SUBNET) == 4096
        assert owners.count(FC_SUBNET) == 2048
        assert owners.count(POOL_SUBNET) == 2048
        # ranges are contiguous and ordered conv < fc < pool
        assert [s.base_value for s in SUBNETS] == [0, 4096, 6144]
        assert [s.last_value for s in SUBNETS] == [4095, 6143, 8191]


class TestIpText:
    def test_format_examples(self):
        assert format_ip(5119) == "19.255"
        assert parse_ip("0.0") == 0
        assert parse_ip("31.255") == 8191

    def test_roundtrip_all_values(self):
        for v in range(MAX_VALUE + 1):
            assert parse_ip(format_ip(v)) == v

    @pytest.mark.parametrize("bad", ["32.0", "256.1", "1.2.3", "7", "a.b", "-1.4", "1.256"])
    def test_malformed_rejected(self, bad):
        with pytest.raises(ValueError):
            parse_ip(bad)


class TestExhaustiveRoundtrip:
    def test_gene_space_size(self):
        assert sum(1 for _ in all_layer_genes()) == 8 * 128 * 4 + 4 * 4 * 2 + 2048 == 6176

    def test_every_gene_roundtrips_and_matches_oracle(self):
        for gene in all_layer_genes():
            value = encode_layer(gene)
            assert value == oracle_encode(gene)
            assert decode_interface(value) == gene

    def test_every_value_decodes_and_reencodes_into_same_subnet(self):
        for v in range(MAX_VALUE + 1):
            gene = decode_interface(v)
            assert subnet_of(encode_layer(gene)).layer_type is type(gene)


class TestLayerText:
    @pytest.mark.parametrize("gene", [
        ConvLayer(5, 32, 1),
        PoolLayer(2, 2, PoolType.AVERAGE),
        PoolLayer(4, 1, PoolType.MAX),
        FullyConnectedLayer(100),
    ])
    def test_roundtrip(self, gene):
        assert parse_layer(format_layer(gene)) == gene

    def test_malformed_rejected(self):
        with pytest.raises(ValueError):
            parse_layer("conv(filter=5)")
        with pytest.raises(ValueError):
            parse_layer("dense(neurons=3)")
