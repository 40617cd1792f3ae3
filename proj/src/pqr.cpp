#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "smpbe/error.hpp"
#include "smpbe/model.hpp"

namespace smpbe {

namespace {

bool parse_double(const std::string& token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

// PDB2PQR output is whitespace-separated but the chain column is optional, so fields are taken
// from the end of the record rather than by fixed position.
ChargeSystem parse_pqr(std::istream& in) {
  std::vector<Atom> atoms;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string record;
    if (!(ls >> record)) continue;
    if (record != "ATOM" && record != "HETATM") continue;
    std::vector<std::string> fields;
    for (std::string tok; ls >> tok;) fields.push_back(tok);
    if (fields.size() < 5) {
      throw InputError("PQR line " + std::to_string(line_no) + ": expected x y z charge radius");
    }
    double v[5];
    for (int i = 0; i < 5; ++i) {
      const auto& tok = fields[fields.size() - 5 + i];
      if (!parse_double(tok, v[i])) {
        throw InputError("PQR line " + std::to_string(line_no) + ": malformed numeric field '" +
                         tok + "'");
      }
    }
    atoms.push_back(Atom{{v[0], v[1], v[2]}, v[3], v[4]});
  }
  if (atoms.empty()) throw InputError("PQR: no atoms");
  return ChargeSystem(std::move(atoms));
}

ChargeSystem read_pqr_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open PQR file " + path);
  return parse_pqr(in);
}

void write_pqr(std::ostream& out, const ChargeSystem& charges) {
  auto num = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
  };
  std::size_t serial = 0;
  for (const auto& a : charges.atoms()) {
    ++serial;
    out << "ATOM " << serial << " X UNK 1 " << num(a.position.x) << ' ' << num(a.position.y) << ' '
        << num(a.position.z) << ' ' << num(a.charge) << ' ' << num(a.radius) << '\n';
  }
  out << "END\n";
}

}  // namespace smpbe
