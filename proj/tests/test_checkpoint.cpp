#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "eduvl/checkpoint.hpp"
#include "support/synthetic.hpp"

using namespace eduvl;

TEST_CASE("checkpoint round-trips every tensor and the vocabulary") {
    Corpus corpus = synth::overfit_corpus(2, 61);
    ModelDims dims;
    dims.d = 8;
    dims.heads = 2;
    dims.encoder_layers = 1;
    dims.mtl_layers = 2;
    dims.max_positions = 128;
    ModelParams<double> params = init_params<double>(dims, corpus, 15);

    auto path = std::filesystem::temp_directory_path() / "eduvl_ckpt_test.bin";
    write_checkpoint_file(path, to_checkpoint(params, "f64"));

    CheckpointData data = read_checkpoint_file(path);
    CHECK(data.version == kCheckpointVersion);
    CHECK(data.precision == "f64");
    CHECK(data.dims.d == 8);
    CHECK(data.dims.mtl_layers == 2);
    CHECK(data.vocab_words == params.vocab.id_to_word);

    ModelParams<double> loaded = params_from_checkpoint<double>(data);
    auto a = params.param_refs();
    auto b = loaded.param_refs();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(a[i].param->w.a == b[i].param->w.a);
    }

    // Writing the loaded params again reproduces the same bytes.
    auto path2 = std::filesystem::temp_directory_path() / "eduvl_ckpt_test2.bin";
    write_checkpoint_file(path2, to_checkpoint(loaded, "f64"));
    CHECK(io::fnv1a64_file(path) == io::fnv1a64_file(path2));
}

TEST_CASE("checkpoint load rejects corrupted files") {
    auto path = std::filesystem::temp_directory_path() / "eduvl_ckpt_bad.bin";
    std::ofstream(path, std::ios::binary | std::ios::trunc) << "NOTACKPT rest of file";
    CHECK_THROWS_AS(read_checkpoint_file(path), InputError);

    auto missing = std::filesystem::temp_directory_path() / "eduvl_ckpt_missing.bin";
    std::filesystem::remove(missing);
    CHECK_THROWS_AS(read_checkpoint_file(missing), InputError);
}

TEST_CASE("f32 checkpoints load into the f32 model") {
    Corpus corpus = synth::overfit_corpus(1, 62);
    ModelDims dims;
    dims.d = 8;
    dims.heads = 2;
    dims.encoder_layers = 1;
    dims.mtl_layers = 1;
    dims.max_positions = 128;
    ModelParams<float> params = init_params<float>(dims, corpus, 16);

    auto path = std::filesystem::temp_directory_path() / "eduvl_ckpt_f32.bin";
    write_checkpoint_file(path, to_checkpoint(params, "f32"));
    CheckpointData data = read_checkpoint_file(path);
    CHECK(data.precision == "f32");
    ModelParams<float> loaded = params_from_checkpoint<float>(data);
    CHECK(loaded.embedding.w.a == params.embedding.w.a);
}
