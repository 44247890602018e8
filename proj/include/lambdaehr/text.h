#ifndef LAMBDAEHR_TEXT_H_
#define LAMBDAEHR_TEXT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared across modules.
namespace lambdaehr {

std::string_view Trim(std::string_view s);
std::vector<std::string> Split(std::string_view s, char sep);
std::vector<std::string> SplitWhitespace(std::string_view s);
std::string Join(const std::vector<std::string> &parts, std::string_view sep);

// [A-Za-z_][A-Za-z0-9_]*
bool IsIdentifier(std::string_view s);
bool IsIdentStart(char c);
bool IsIdentChar(char c);

std::string ToLowerAscii(std::string_view s);

// Decodes one UTF-8 code point starting at s[*pos] and advances *pos. Invalid
// bytes decode as U+FFFD and advance by one.
char32_t DecodeUtf8(std::string_view s, std::size_t *pos);
void AppendUtf8(char32_t cp, std::string *out);

// Number of code points in s.
std::size_t Utf8Length(std::string_view s);

// Byte offset of the code point with index `cp_index`; returns s.size() for
// cp_index == Utf8Length(s) and npos past that.
std::size_t Utf8ByteOffset(std::string_view s, std::size_t cp_index);

bool IsPunctuation(char32_t cp);
bool IsSpace(char32_t cp);

std::string ReadFile(const std::string &path);
void WriteFile(const std::string &path, std::string_view contents);

}  // namespace lambdaehr

#endif  // LAMBDAEHR_TEXT_H_
