import math
import random
import struct

import pytest
from hypothesis import given, settings, strategies as st

from vortex.errors import ProtocolError, ValidationFailure
from vortex.protocol import (MAX_FRAME, POSE_SIZE, DatagramLengthError, DecodeError,
                             FrameDecoder, FrameTooLarge, FramingError, MsgType, NoSamples,
                             NotAPose, PoseUpdate, PoseValidationError, ReliableEnvelope,
                             TimeSyncSample, Transform, TruncatedDatagram, UnknownVersion,
                             check_seq_monotonic, decode_frame, decode_pose, decode_stream,
                             encode_frame, encode_pose, estimate_clock_offset)

# Written out by hand from the layout table, not produced by the codec.
JOIN_BODY = b'{"msg_type":"Join","payload":{"role":"Nurse"},"seq":1,"session_id":7}'
ACK_BODY = b'{"msg_type":"JoinAck","payload":{"client_id":3},"seq":1,"session_id":7}'
GOLDEN_STREAM = (b"\x00\x00\x00\x45" + JOIN_BODY) + (b"\x00\x00\x00\x47" + ACK_BODY)

IDENTITY = "00000000" * 3 + "3f800000"
GOLDEN_POSE_HEX = (
    "56525458" "01" "00000001" "00000002" "0000000000000003"
    + "00000000" "3fc00000" "00000000" + IDENTITY
    + "00000000" * 3 + IDENTITY
    + "00000000" * 3 + IDENTITY
    + "00000000" "00000000" "3f800000"
)


def test_golden_lengths_are_hand_counted():
    assert len(JOIN_BODY) == 0x45 and len(ACK_BODY) == 0x47


def test_golden_frames_encode_byte_exact():
    a = ReliableEnvelope(MsgType.JOIN, 7, 1, {"role": "Nurse"})
    b = ReliableEnvelope(MsgType.JOIN_ACK, 7, 1, {"client_id": 3})
    assert encode_frame(a) + encode_frame(b) == GOLDEN_STREAM


def test_two_frames_in_one_stream_decode_in_order():
    envs = decode_stream(GOLDEN_STREAM)
    assert [e.msg_type for e in envs] == [MsgType.JOIN, MsgType.JOIN_ACK]
    assert envs[0].payload == {"role": "Nurse"} and envs[1].payload == {"client_id": 3}


def test_incremental_decoder_byte_by_byte():
    dec = FrameDecoder()
    out = []
    for i in range(len(GOLDEN_STREAM)):
        out += dec.feed(GOLDEN_STREAM[i:i + 1])
    assert len(out) == 2 and dec.pending == 0
    dec.close()


def test_decoder_close_inside_frame():
    dec = FrameDecoder()
    dec.feed(GOLDEN_STREAM[:10])
    with pytest.raises(FramingError):
        dec.close()


def test_declared_2mib_frame_too_large():
    with pytest.raises(FrameTooLarge):
        decode_frame(struct.pack(">I", 2 << 20) + b"{}")
    with pytest.raises(FrameTooLarge):
        FrameDecoder().feed(struct.pack(">I", 2 << 20))


def test_encode_oversize_payload():
    env = ReliableEnvelope(MsgType.EVENT, 1, 1, {"blob": "x" * MAX_FRAME})
    with pytest.raises(FrameTooLarge):
        encode_frame(env)


@pytest.mark.parametrize("data, exc", [
    (b"\x00\x00", FramingError),
    (b"\x00\x00\x00\x10{}", FramingError),
    (b"\x00\x00\x00\x02{}extra", FramingError),
    (b"\x00\x00\x00\x02[]", DecodeError),
    (b"\x00\x00\x00\x03\xff\xfe\xfd", DecodeError),
    (b"\x00\x00\x00\x02{}", DecodeError),
])
def test_frame_errors(data, exc):
    with pytest.raises(exc):
        decode_frame(data)


def test_envelope_field_checks():
    with pytest.raises(DecodeError):
        ReliableEnvelope(MsgType.EVENT, -1, 0)
    with pytest.raises(DecodeError):
        ReliableEnvelope(MsgType.EVENT, 1, 1 << 64)
    body = b'{"msg_type":"Bogus","payload":{},"seq":1,"session_id":1}'
    with pytest.raises(DecodeError):
        decode_frame(struct.pack(">I", len(body)) + body)


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-2**53, 2**53) | st.text(max_size=20)
    | st.floats(allow_nan=False, allow_infinity=False),
    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=8), kids, max_size=4),
    max_leaves=12)
envelopes = st.builds(ReliableEnvelope, st.sampled_from(list(MsgType)),
                      st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1),
                      st.dictionaries(st.text(max_size=8), json_values, max_size=5))


@given(envelopes)
def test_frame_round_trip(env):
    data = encode_frame(env)
    assert decode_frame(data) == env
    assert encode_frame(decode_frame(data)) == data


@given(st.binary(max_size=200))
def test_frame_decoder_total_on_garbage(data):
    try:
        decode_frame(data)
    except ProtocolError:
        pass
    try:
        FrameDecoder().feed(data)
    except ProtocolError:
        pass


def test_seq_monotonic_validator():
    mk = lambda seq, sid=1: ReliableEnvelope(MsgType.EVENT, sid, seq)
    good = [("a", mk(1)), ("b", mk(1)), ("a", mk(2)), ("a", mk(1, sid=2))]
    assert check_seq_monotonic(good) == []
    bad = good + [("a", mk(2))]
    assert len(check_seq_monotonic(bad)) == 1


# -- pose datagrams ---------------------------------------------------------

def simple_pose(**kw) -> PoseUpdate:
    base = dict(client_id=1, seq=2, t_us=3, head=Transform((0.0, 1.5, 0.0)),
                hand_left=Transform((0.0, 0.0, 0.0)), hand_right=Transform((0.0, 0.0, 0.0)))
    base.update(kw)
    return PoseUpdate(**base)


def test_golden_pose_datagram():
    data = encode_pose(simple_pose())
    assert len(data) == POSE_SIZE == 4 + 1 + 4 + 4 + 8 + 3 * 28 + 12 == 117
    assert data[:4] == bytes([0x56, 0x52, 0x54, 0x58])
    assert data.hex() == GOLDEN_POSE_HEX
    assert decode_pose(bytes.fromhex(GOLDEN_POSE_HEX)) == simple_pose()


def f32(x: float) -> float:
    return struct.unpack(">f", struct.pack(">f", x))[0]


def unit(v):
    n = math.sqrt(sum(c * c for c in v))
    return tuple(f32(c / n) for c in v)


comp = st.floats(-10, 10, allow_nan=False, width=32)
direction = st.tuples(*[st.floats(-1, 1, width=32)] * 3).filter(
    lambda v: sum(c * c for c in v) > 0.01)
quat = st.tuples(*[st.floats(-1, 1, width=32)] * 4).filter(
    lambda v: sum(c * c for c in v) > 0.01)
transforms = st.builds(Transform, st.tuples(comp, comp, comp), quat.map(unit))
poses = st.builds(PoseUpdate, st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1),
                  st.integers(0, 2**64 - 1), transforms, transforms, transforms,
                  direction.map(unit))


@settings(deadline=None)
@given(poses)
def test_pose_round_trip(p):
    data = encode_pose(p)
    assert len(data) == 117 and data[:4] == b"VRTX"
    assert decode_pose(data) == p


def random_pose(rng: random.Random) -> PoseUpdate:
    def tf():
        pos = tuple(f32(rng.uniform(-3, 3)) for _ in range(3))
        return Transform(pos, unit([rng.gauss(0, 1) for _ in range(4)]))
    return PoseUpdate(rng.getrandbits(32), rng.getrandbits(32), rng.getrandbits(64),
                      tf(), tf(), tf(), unit([rng.gauss(0, 1) for _ in range(3)]))


def test_pose_round_trip_10k_seeded():
    rng = random.Random(20240917)
    for _ in range(10_000):
        p = random_pose(rng)
        assert decode_pose(encode_pose(p)) == p


@given(st.binary(max_size=200))
def test_pose_decoder_total_on_garbage(data):
    try:
        decode_pose(data)
    except ProtocolError:
        pass


def test_pose_truncated_to_20_bytes():
    with pytest.raises(TruncatedDatagram):
        decode_pose(encode_pose(simple_pose())[:20])


def test_pose_wrong_magic_and_length():
    data = encode_pose(simple_pose())
    with pytest.raises(NotAPose):
        decode_pose(b"XXXX" + data[4:])
    with pytest.raises(DatagramLengthError):
        decode_pose(data + b"\x00")


def test_pose_unknown_version():
    data = bytearray(encode_pose(simple_pose()))
    data[4] = 9
    with pytest.raises(UnknownVersion):
        decode_pose(bytes(data))


def test_pose_non_unit_quaternion_rejected():
    with pytest.raises(PoseValidationError):
        encode_pose(simple_pose(head=Transform((0, 0, 0), (0, 0, 0, 1.01))))
    # within tolerance
    encode_pose(simple_pose(head=Transform((0, 0, 0), (0, 0, 0, 1.0005))))
    data = bytearray(encode_pose(simple_pose()))
    data[105:117] = struct.pack(">3f", 0, 0, 2)
    with pytest.raises(PoseValidationError):
        decode_pose(bytes(data))


# -- clock offset -------------------------------------------------------------

def test_offset_synchronized_clocks():
    assert estimate_clock_offset([TimeSyncSample(100, 100, 130, 130)]) == 0


def test_offset_hand_example():
    # ((160 - 100) + (165 - 120)) / 2
    assert estimate_clock_offset([TimeSyncSample(100, 160, 165, 120)]) == 52.5


def test_offset_ignores_high_rtt_outlier():
    good = TimeSyncSample(100, 160, 165, 120)
    outlier = TimeSyncSample(1000, 9000, 9001, 1500)
    assert estimate_clock_offset([good, outlier]) == 52.5
    assert estimate_clock_offset([outlier, good]) == 52.5


def test_offset_requires_samples():
    with pytest.raises(NoSamples):
        estimate_clock_offset([])


def test_inconsistent_sample_rejected():
    with pytest.raises(ValidationFailure):
        TimeSyncSample(100, 0, 0, 50)


@given(st.integers(-10**9, 10**9), st.integers(0, 10**6), st.integers(0, 10**5),
       st.lists(st.tuples(st.integers(0, 10**9), st.integers(0, 10**5)), min_size=1, max_size=8))
def test_offset_exact_under_symmetric_latency(offset, one_way, service, sends):
    samples = []
    for t1, extra in sends:
        t2 = t1 + offset + one_way
        t3 = t2 + service + extra
        t4 = t3 - offset + one_way
        samples.append(TimeSyncSample(t1, t2, t3, t4))
    assert estimate_clock_offset(samples) == offset
