// keps command line: run / sweep / refine / audit, driving the C API only.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "keps.h"

namespace {

void usage(std::FILE* to) {
  std::fprintf(to,
               "usage:\n"
               "  keps run    --config PATH [--out DIR] [--seed N]\n"
               "  keps sweep  --config PATH --amplitudes a,b,c [--out DIR] [--seed N]\n"
               "  keps refine --config PATH (--dts d1,d2,d3 | --resolutions n1,n2,n3)\n"
               "              [--out DIR]\n"
               "  keps audit  --config PATH [--out DIR]\n"
               "\n"
               "exit codes: 0 clean, 1 usage/config error, 2 guard violation,\n"
               "            3 step failure\n");
}

bool parse_doubles(const char* text, std::vector<double>& out) {
  const char* p = text;
  while (*p) {
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p) return false;
    out.push_back(v);
    p = end;
    if (*p == ',') ++p;
    else if (*p) return false;
  }
  return !out.empty();
}

bool parse_ints(const char* text, std::vector<int>& out) {
  const char* p = text;
  while (*p) {
    char* end = nullptr;
    const long v = std::strtol(p, &end, 10);
    if (end == p) return false;
    out.push_back(static_cast<int>(v));
    p = end;
    if (*p == ',') ++p;
    else if (*p) return false;
  }
  return !out.empty();
}

struct Args {
  std::string command;
  std::string config_path;
  std::string out_dir;
  bool have_seed = false;
  unsigned long long seed = 0;
  std::vector<double> amplitudes;
  std::vector<double> dts;
  std::vector<int> resolutions;
};

int fail_usage(const char* msg) {
  std::fprintf(stderr, "keps: %s\n", msg);
  usage(stderr);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    usage(stderr);
    return 1;
  }
  Args args;
  args.command = argv[1];
  if (args.command == "--help" || args.command == "-h") {
    usage(stdout);
    return 0;
  }
  if (args.command != "run" && args.command != "sweep" && args.command != "refine" &&
      args.command != "audit")
    return fail_usage("unknown subcommand");

  for (int i = 2; i < argc; ++i) {
    const std::string flag = argv[i];
    auto value = [&](const char* name) -> const char* {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "keps: %s requires a value\n", name);
        std::exit(1);
      }
      return argv[++i];
    };
    if (flag == "--config") args.config_path = value("--config");
    else if (flag == "--out") args.out_dir = value("--out");
    else if (flag == "--seed") {
      args.seed = std::strtoull(value("--seed"), nullptr, 10);
      args.have_seed = true;
    } else if (flag == "--amplitudes") {
      if (!parse_doubles(value("--amplitudes"), args.amplitudes))
        return fail_usage("--amplitudes expects a comma-separated number list");
    } else if (flag == "--dts") {
      if (!parse_doubles(value("--dts"), args.dts))
        return fail_usage("--dts expects a comma-separated number list");
    } else if (flag == "--resolutions") {
      if (!parse_ints(value("--resolutions"), args.resolutions))
        return fail_usage("--resolutions expects a comma-separated integer list");
    } else {
      return fail_usage(("unknown flag: " + flag).c_str());
    }
  }

  if (args.config_path.empty()) return fail_usage("--config is required");
  if (args.command == "sweep" && args.amplitudes.empty())
    return fail_usage("sweep requires --amplitudes");
  if (args.command == "refine" && args.dts.empty() && args.resolutions.empty())
    return fail_usage("refine requires --dts or --resolutions");

  keps_config* cfg = nullptr;
  int rc = keps_config_load(args.config_path.c_str(), &cfg);
  if (rc != KEPS_OK) {
    std::fprintf(stderr, "keps: %s\n", keps_last_error());
    return rc;
  }
  if (args.have_seed) keps_config_set_seed(cfg, args.seed);
  if (!args.out_dir.empty()) keps_config_set_output_dir(cfg, args.out_dir.c_str());

  keps_result* result = nullptr;
  if (args.command == "run") {
    rc = keps_run(cfg, &result);
  } else if (args.command == "sweep") {
    rc = keps_sweep(cfg, args.amplitudes.data(), static_cast<int>(args.amplitudes.size()),
                    &result);
  } else if (args.command == "refine") {
    rc = keps_refine(cfg, args.dts.data(), static_cast<int>(args.dts.size()),
                     args.resolutions.data(), static_cast<int>(args.resolutions.size()),
                     &result);
  } else {
    rc = keps_audit(cfg, &result);
  }

  if (result) {
    std::printf("%s\n", keps_result_summary_json(result));
    keps_result_free(result);
  } else if (rc != KEPS_OK) {
    std::fprintf(stderr, "keps: %s\n", keps_last_error());
  }
  keps_config_free(cfg);
  return rc;
}
