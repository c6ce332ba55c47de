#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eduvl/model.hpp"

namespace eduvl {

constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // row-major
};

struct CheckpointData {
    uint32_t version = kCheckpointVersion;
    ModelDims dims;
    std::string precision = "f64";  // f64 | f32
    std::vector<std::string> vocab_words;
    std::vector<CheckpointTensor> tensors;
};

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint_file(const std::filesystem::path& path);

template <class T>
CheckpointData to_checkpoint(ModelParams<T>& params, const std::string& precision) {
    CheckpointData data;
    data.dims = params.dims;
    data.precision = precision;
    data.vocab_words = params.vocab.id_to_word;
    for (const auto& ref : params.param_refs()) {
        CheckpointTensor tensor;
        tensor.name = ref.name;
        tensor.rows = ref.param->w.rows;
        tensor.cols = ref.param->w.cols;
        tensor.values.reserve(ref.param->w.size());
        for (const T& v : ref.param->w.a) tensor.values.push_back(static_cast<double>(v));
        data.tensors.push_back(std::move(tensor));
    }
    return data;
}

template <class T>
ModelParams<T> params_from_checkpoint(const CheckpointData& data) {
    ModelParams<T> params =
        init_params<T>(data.dims, Vocabulary::from_words(data.vocab_words), /*seed=*/0);
    auto refs = params.param_refs();
    if (refs.size() != data.tensors.size())
        throw InputError("checkpoint holds " + std::to_string(data.tensors.size()) +
                         " tensors, model expects " + std::to_string(refs.size()));
    for (size_t i = 0; i < refs.size(); ++i) {
        const CheckpointTensor& tensor = data.tensors[i];
        if (tensor.name != refs[i].name)
            throw InputError("checkpoint tensor '" + tensor.name + "' does not match expected '" +
                             refs[i].name + "'");
        if (tensor.rows != refs[i].param->w.rows || tensor.cols != refs[i].param->w.cols)
            throw InputError("checkpoint tensor '" + tensor.name + "' has shape " +
                             std::to_string(tensor.rows) + "x" + std::to_string(tensor.cols) +
                             ", expected " + std::to_string(refs[i].param->w.rows) + "x" +
                             std::to_string(refs[i].param->w.cols));
        for (size_t j = 0; j < tensor.values.size(); ++j)
            refs[i].param->w.a[j] = static_cast<T>(tensor.values[j]);
    }
    return params;
}

}  // namespace eduvl
