#pragma once

#include <atg/mm.hpp>

#include <cstdio>
#include <memory>
#include <string>

namespace testdata {

inline std::string data(const std::string& f) { return std::string(ATG_DATA) + "/" + f; }

inline const atg::Database& fragment() {
  static const atg::Database db = atg::load_database(data("prop.mm"));
  return db;
}

// Minimal database around the proof of pm2.21dd.
inline const char* kMini = R"(
  $c ( ) -> -. wff |- $.
  $v ph ps ch th $.
  wph $f wff ph $.
  wps $f wff ps $.
  wch $f wff ch $.
  wth $f wff th $.
  wn $a wff -. ph $.
  wi $a wff ( ph -> ps ) $.
  ${
    min $e |- ph $.
    maj $e |- ( ph -> ps ) $.
    ax-mp $a |- ps $.
  $}
  ax-1 $a |- ( ph -> ( ps -> ph ) ) $.
  ax-3 $a |- ( ( -. ph -> -. ps ) -> ( ps -> ph ) ) $.
  ${
    pm2.65i.1 $e |- ( ph -> ps ) $.
    pm2.65i.2 $e |- ( ph -> -. ps ) $.
    pm2.65i $a |- -. ph $.
  $}
  ${
    pm2.21i.1 $e |- -. ph $.
    pm2.21i $p |- ( ph -> ps ) $=
      wps wn wph wn wi wph wps wi wph wn wps wn wph wn wi pm2.21i.1
      wph wn wps wn ax-1 ax-mp wps wph ax-3 ax-mp $.
  $}
  ${
    pm2.21dd.1 $e |- ( ph -> ps ) $.
    pm2.21dd.2 $e |- ( ph -> -. ps ) $.
    pm2.21dd $p |- ( ph -> ch ) $=
      ( pm2.65i pm2.21i ) ACABDEFG $.
  $}
  ax1re $p |- ( ph -> ( ps -> ph ) ) $= wph wps ax-1 $.
)";

inline std::string run(const std::string& cmd, int* status = nullptr) {
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  int st = pclose(p);
  if (status) *status = WEXITSTATUS(st);
  return out;
}

}  // namespace testdata
