#ifndef SECTRA_TESTS_TEMPDIR_HPP_
#define SECTRA_TESTS_TEMPDIR_HPP_

#include <cstdlib>
#include <filesystem>
#include <string>

namespace sectra::testsupport {

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::string scratch =
        (std::filesystem::temp_directory_path() / "sectra-test-XXXXXX").string();
    path = ::mkdtemp(scratch.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path file(const std::string& name) const { return path / name; }
};

}  // namespace sectra::testsupport

#endif  // SECTRA_TESTS_TEMPDIR_HPP_
