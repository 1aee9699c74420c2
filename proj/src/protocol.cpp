#include "holobind/protocol.hpp"

#include <chrono>
#include <cstring>
#include <ostream>

#include "holobind/errors.hpp"
#include "holobind/vsa.hpp"

namespace holobind {
namespace {

constexpr std::uint8_t kRequestMagic[4] = {'H', 'B', 'R', 'Q'};
constexpr std::uint8_t kResponseMagic[4] = {'H', 'B', 'R', 'S'};

void put_envelope(Bytes& out, const std::uint8_t (&magic)[4], std::uint64_t id, std::uint8_t status) {
  out.insert(out.end(), std::begin(magic), std::end(magic));
  put_u16(out, kProtocolVersion);
  put_u64(out, id);
  out.push_back(status);
  out.insert(out.end(), 3, 0);
}

struct Envelope {
  std::uint64_t request_id;
  std::uint8_t status;
};

Envelope read_envelope(std::span<const std::uint8_t> bytes, const std::uint8_t (&magic)[4]) {
  if (bytes.size() < kEnvelopeSize)
    throw ProtocolError("truncated envelope: expected " + std::to_string(kEnvelopeSize) +
                            " bytes, got " + std::to_string(bytes.size()),
                        bytes.size());
  if (std::memcmp(bytes.data(), magic, 4) != 0)
    throw ProtocolError(std::string("bad magic, expected ") +
                            std::string(reinterpret_cast<const char*>(magic), 4),
                        0);
  if (get_u16(bytes, 4) != kProtocolVersion) throw ProtocolError("unsupported version", 4);
  for (std::size_t i = 15; i < kEnvelopeSize; ++i)
    if (bytes[i] != 0) throw ProtocolError("reserved byte is not zero", i);
  return {get_u64(bytes, 6), bytes[14]};
}

Tensor read_payload(std::span<const std::uint8_t> bytes) {
  std::size_t offset = kEnvelopeSize;
  try {
    Tensor t = decode_tensor(bytes, offset);
    if (offset != bytes.size()) throw ProtocolError("trailing bytes after payload", offset);
    return t;
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("bad payload: ") + e.what(), e.offset());
  }
}

}  // namespace

const char* to_string(Status status) {
  switch (status) {
    case Status::ok: return "ok";
    case Status::malformed: return "malformed";
    case Status::apply_failed: return "apply_failed";
  }
  return "?";
}

Bytes encode_request(const BoundRequest& req) {
  Bytes out;
  out.reserve(request_wire_size(req.payload.dims()));
  put_envelope(out, kRequestMagic, req.request_id, 0);
  append_tensor(out, req.payload, Dtype::f32);
  return out;
}

BoundRequest decode_request(std::span<const std::uint8_t> bytes) {
  const auto env = read_envelope(bytes, kRequestMagic);
  if (env.status != 0) throw ProtocolError("request status byte must be 0", 14);
  return BoundRequest{env.request_id, read_payload(bytes)};
}

Bytes encode_response(const BoundResponse& resp) {
  Bytes out;
  put_envelope(out, kResponseMagic, resp.request_id, static_cast<std::uint8_t>(resp.status));
  append_tensor(out, resp.payload, Dtype::f32);
  return out;
}

BoundResponse decode_response(std::span<const std::uint8_t> bytes) {
  const auto env = read_envelope(bytes, kResponseMagic);
  if (env.status > static_cast<std::uint8_t>(Status::apply_failed))
    throw ProtocolError("unknown status " + std::to_string(env.status), 14);
  return BoundResponse{env.request_id, static_cast<Status>(env.status), read_payload(bytes)};
}

std::size_t request_wire_size(const Dims& dims) {
  return kEnvelopeSize + container_size(dims, Dtype::f32);
}

Worker::Worker(BackboneSpec spec, RequestLogger logger)
    : spec_(std::move(spec)), logger_(std::move(logger)) {
  if (!spec_.shape_preserving())
    throw SpecError("worker backbone must preserve shape: " + dims_to_string(spec_.input_dims) +
                    " -> " + dims_to_string(spec_.output_dims()));
}

Bytes Worker::handle(std::span<const std::uint8_t> request) const {
  const auto t0 = std::chrono::steady_clock::now();
  BoundResponse resp;
  Dims dims;
  try {
    BoundRequest req = decode_request(request);
    resp.request_id = req.request_id;
    dims = req.payload.dims();
    try {
      resp.payload = apply(spec_, req.payload);
    } catch (const std::exception&) {
      resp.status = Status::apply_failed;
      resp.payload = Tensor();
    }
  } catch (const ProtocolError&) {
    // Echo the id when the envelope itself was readable.
    if (request.size() >= kEnvelopeSize) resp.request_id = get_u64(request, 6);
    resp.status = Status::malformed;
  }
  Bytes out;
  try {
    out = encode_response(resp);
  } catch (const Error&) {
    // f_W output that does not fit the f32 wire format.
    resp.status = Status::apply_failed;
    resp.payload = Tensor();
    out = encode_response(resp);
  }
  if (logger_) {
    const double micros =
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
    logger_(RequestLog{resp.request_id, dims, micros, resp.status});
  }
  return out;
}

Bytes RecordingTransport::exchange(std::span<const std::uint8_t> request) {
  Bytes response = inner_.exchange(request);
  std::lock_guard lock(mutex_);
  transcript_.push_back({Bytes(request.begin(), request.end()), response});
  return response;
}

std::vector<RecordingTransport::Exchange> RecordingTransport::transcript() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

std::vector<double> client_infer(const Tensor& x, const QueryPlan& plan, Transport& transport,
                                 const Head& predict_head) {
  if (plan.k == 0) throw ParameterError("query plan needs k >= 1");
  std::vector<double> mean(predict_head.classes(), 0.0);
  RngStream rng = plan.rng;
  for (std::size_t rep = 0; rep < plan.k; ++rep) {
    auto draw = sample_secret(x.dims(), rng);
    rng = draw.next;
    Secret& secret = draw.value;
    const std::uint64_t id = rng.word();
    rng = rng.advanced(1);

    const Bytes response_bytes = transport.exchange(encode_request({id, bind(x, secret)}));
    const BoundResponse resp = decode_response(response_bytes);
    if (resp.request_id != id) {
      secure_wipe(secret.tensor);
      throw ProtocolError("response id does not echo the request", 6);
    }
    if (resp.status != Status::ok) {
      secure_wipe(secret.tensor);
      throw RemoteError(std::string("worker reported ") + to_string(resp.status),
                        static_cast<int>(resp.status));
    }
    const auto p = head_predict(predict_head, unbind(resp.payload, secret));
    secure_wipe(secret.tensor);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += p[c];
  }
  for (double& v : mean) v /= static_cast<double>(plan.k);
  return mean;
}

std::uint64_t head_flops(const Head& head) {
  return static_cast<std::uint64_t>(head.w1.size() + head.w2.size());
}

FlopReport cost_report(const BackboneSpec& spec, std::size_t k, const Head* predict_head) {
  const auto g = plane_geometry(spec.input_dims);
  const std::uint64_t transform = fft_flops(g.rows * g.cols);
  const std::uint64_t bind_cost = 3 * transform * g.channels;
  const std::uint64_t local_one = 2 * bind_cost + (predict_head ? head_flops(*predict_head) : 0);
  FlopReport r;
  r.remote_flops = k * count_flops(spec);
  r.local_flops = k * local_one;
  const std::uint64_t wire = request_wire_size(spec.input_dims);
  r.bytes_up = k * wire;
  r.bytes_down = k * (kEnvelopeSize + container_size(spec.output_dims(), Dtype::f32));
  return r;
}

void write_cost_csv(std::ostream& out, std::size_t k, const FlopReport& report) {
  char fraction[32];
  std::snprintf(fraction, sizeof fraction, "%.6f", report.remote_fraction());
  out << "k,remote_flops,local_flops,remote_fraction,bytes_up,bytes_down\n"
      << k << ',' << report.remote_flops << ',' << report.local_flops << ',' << fraction << ','
      << report.bytes_up << ',' << report.bytes_down << '\n';
}

}  // namespace holobind
