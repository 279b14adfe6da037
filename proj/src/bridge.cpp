#include "ctsynth/bridge.h"

#include <algorithm>
#include <cstring>
#include <new>
#include <string>

#include "ctsynth/error.hpp"
#include "ctsynth/losses.hpp"
#include "ctsynth/sampler.hpp"

struct ctsynth_shard {
  ctsynth::ShardReader reader;
  std::string header_json;
  std::string meta;
};

struct ctsynth_engine {
  ctsynth::SamplerConfig config;
  std::vector<ctsynth::SourceVolume> sources;
  std::string meta;
};

namespace {

thread_local std::string g_code;
thread_local std::string g_message;

template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const ctsynth::Error& e) {
    g_code = ctsynth::errc_name(e.code());
    g_message = e.what();
  } catch (const std::bad_alloc&) {
    g_code = "io";
    g_message = "out of memory";
  } catch (const std::exception& e) {
    g_code = "invalid-argument";
    g_message = e.what();
  }
  return -1;
}

void require(bool ok, const char* what) {
  if (!ok) ctsynth::fail(ctsynth::Errc::invalid_argument, what);
}

}  // namespace

extern "C" {

const char* ctsynth_last_error_code(void) { return g_code.c_str(); }
const char* ctsynth_last_error_message(void) { return g_message.c_str(); }

int ctsynth_shard_open(const char* path, ctsynth_shard** out) {
  return guarded([&] {
    require(path && out, "null argument");
    ctsynth::ShardReader reader(path);
    std::string header = reader.header().to_json().dump();
    *out = new ctsynth_shard{std::move(reader), std::move(header), {}};
  });
}

void ctsynth_shard_close(ctsynth_shard* shard) { delete shard; }

uint64_t ctsynth_shard_record_count(const ctsynth_shard* shard) { return shard ? shard->reader.size() : 0; }

int64_t ctsynth_shard_patch_size(const ctsynth_shard* shard) { return shard ? shard->reader.header().patch_size : 0; }

const char* ctsynth_shard_header_json(const ctsynth_shard* shard) { return shard ? shard->header_json.c_str() : ""; }

int ctsynth_shard_read(ctsynth_shard* shard, uint64_t index, float* channels, uint8_t* target,
                       const char** meta_json) {
  return guarded([&] {
    require(shard, "null shard");
    const auto rec = shard->reader.read(index);
    if (channels) std::copy(rec.channels.begin(), rec.channels.end(), channels);
    if (target) std::copy(rec.target.begin(), rec.target.end(), target);
    if (meta_json) {
      shard->meta = rec.meta.dump();
      *meta_json = shard->meta.c_str();
    }
  });
}

int ctsynth_engine_open(const char* volumes_dir, const char* config_json, ctsynth_engine** out) {
  return guarded([&] {
    require(volumes_dir && config_json && out, "null argument");
    auto config = ctsynth::parse_sampler_config(config_json);
    auto sources = ctsynth::load_sources(volumes_dir, config);
    *out = new ctsynth_engine{std::move(config), std::move(sources), {}};
  });
}

void ctsynth_engine_close(ctsynth_engine* engine) { delete engine; }

int64_t ctsynth_engine_patch_size(const ctsynth_engine* engine) { return engine ? engine->config.patch_size : 0; }

int ctsynth_engine_sample(ctsynth_engine* engine, uint64_t index, float* channels, uint8_t* target,
                          const char** meta_json) {
  return guarded([&] {
    require(engine, "null engine");
    const auto s = ctsynth::sample_from_sources(engine->sources, index, engine->config);
    if (channels) std::copy(s.channels.channels.begin(), s.channels.channels.end(), channels);
    if (target) std::copy(s.target.data().begin(), s.target.data().end(), target);
    if (meta_json) {
      engine->meta = s.meta.dump();
      *meta_json = engine->meta.c_str();
    }
  });
}

int ctsynth_total_loss(const double* p, const uint8_t* y, size_t n, double alpha, double beta, double gamma,
                       double eps, double* value, double* grad) {
  return guarded([&] {
    require((p && y) || n == 0, "null buffer");
    require(value, "null value");
    const ctsynth::LossParams params{alpha, beta, gamma, eps};
    const auto r = ctsynth::total_loss_and_grad({p, n}, {y, n}, params);
    *value = r.value;
    if (grad) std::copy(r.grad.begin(), r.grad.end(), grad);
  });
}

}  // extern "C"
