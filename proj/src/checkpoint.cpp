#include "eduvl/checkpoint.hpp"

#include <cstring>

namespace eduvl {

namespace {

constexpr char kMagic[8] = {'E', 'D', 'U', 'V', 'L', 'C', 'K', 'P'};

void put_u32(std::string& out, uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

void put_u64(std::string& out, uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

void put_f64(std::string& out, double v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.append(s);
}

struct Reader {
    const std::string& bytes;
    size_t pos = 0;
    std::string context;

    void need(size_t n) const {
        if (pos + n > bytes.size()) throw InputError(context + ": truncated checkpoint");
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, bytes.data() + pos, 4);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, bytes.data() + pos, 8);
        pos += 8;
        return v;
    }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, bytes.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointData& data) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, data.version);
    put_u32(out, static_cast<uint32_t>(data.dims.d));
    put_u32(out, static_cast<uint32_t>(data.dims.heads));
    put_u32(out, static_cast<uint32_t>(data.dims.encoder_layers));
    put_u32(out, static_cast<uint32_t>(data.dims.mtl_layers));
    put_u32(out, static_cast<uint32_t>(data.dims.max_positions));
    put_string(out, data.precision);
    put_u64(out, data.vocab_words.size());
    for (const auto& word : data.vocab_words) put_string(out, word);
    put_u64(out, data.tensors.size());
    for (const auto& tensor : data.tensors) {
        put_string(out, tensor.name);
        put_u32(out, static_cast<uint32_t>(tensor.rows));
        put_u32(out, static_cast<uint32_t>(tensor.cols));
        for (double v : tensor.values) put_f64(out, v);
    }
    io::atomic_write(path, out);
}

CheckpointData read_checkpoint_file(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    Reader r{bytes, 0, path.string()};
    r.need(sizeof(kMagic));
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw InputError(path.string() + ": not a checkpoint file");
    r.pos = sizeof(kMagic);

    CheckpointData data;
    data.version = r.u32();
    if (data.version != kCheckpointVersion)
        throw InputError(path.string() + ": unsupported checkpoint version " +
                         std::to_string(data.version));
    data.dims.d = static_cast<int>(r.u32());
    data.dims.heads = static_cast<int>(r.u32());
    data.dims.encoder_layers = static_cast<int>(r.u32());
    data.dims.mtl_layers = static_cast<int>(r.u32());
    data.dims.max_positions = static_cast<int>(r.u32());
    data.precision = r.str();
    if (data.precision != "f64" && data.precision != "f32")
        throw InputError(path.string() + ": unknown precision '" + data.precision + "'");

    const uint64_t vocab_size = r.u64();
    data.vocab_words.reserve(vocab_size);
    for (uint64_t i = 0; i < vocab_size; ++i) data.vocab_words.push_back(r.str());

    const uint64_t tensor_count = r.u64();
    for (uint64_t i = 0; i < tensor_count; ++i) {
        CheckpointTensor tensor;
        tensor.name = r.str();
        tensor.rows = static_cast<int>(r.u32());
        tensor.cols = static_cast<int>(r.u32());
        const size_t n = static_cast<size_t>(tensor.rows) * static_cast<size_t>(tensor.cols);
        tensor.values.reserve(n);
        for (size_t j = 0; j < n; ++j) tensor.values.push_back(r.f64());
        data.tensors.push_back(std::move(tensor));
    }
    if (r.pos != bytes.size())
        throw InputError(path.string() + ": trailing bytes after checkpoint payload");
    return data;
}

}  // namespace eduvl
