#include "shotsearch/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/ustring.h>
#include <unicode/utf8.h>

#include "shotsearch/error.hpp"

namespace shotsearch::text {

namespace {

icu::UnicodeString decode(std::string_view utf8)
{
    for (std::size_t i = 0; i < utf8.size();) {
        UChar32 c;
        std::int32_t offset = static_cast<std::int32_t>(i);
        U8_NEXT(reinterpret_cast<const std::uint8_t*>(utf8.data()), offset,
                static_cast<std::int32_t>(utf8.size()), c);
        if (c < 0) {
            throw Error(ErrorKind::Parse,
                        "invalid UTF-8 at byte " + std::to_string(i));
        }
        i = static_cast<std::size_t>(offset);
    }
    return icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<std::int32_t>(utf8.size())));
}

const icu::Normalizer2& nfc()
{
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || !n) {
        throw Error(ErrorKind::Io, "ICU NFC normalizer unavailable");
    }
    return *n;
}

std::string normalize_ustring(icu::UnicodeString s)
{
    const auto& norm = nfc();
    UErrorCode status = U_ZERO_ERROR;
    // Case folding can denormalize (e.g. U+0130), so compose on both sides.
    icu::UnicodeString folded = norm.normalize(s, status);
    folded.foldCase(U_FOLD_CASE_DEFAULT);
    icu::UnicodeString out = norm.normalize(folded, status);
    if (U_FAILURE(status)) {
        throw Error(ErrorKind::Parse, "unicode normalization failed");
    }
    std::string utf8;
    out.toUTF8String(utf8);
    return utf8;
}

}  // namespace

std::string normalize(std::string_view utf8)
{
    return normalize_ustring(decode(utf8));
}

std::vector<std::string> tokenize(std::string_view utf8)
{
    icu::UnicodeString s = decode(utf8);
    std::vector<std::string> tokens;
    std::int32_t start = -1;
    std::int32_t i = 0;
    while (i < s.length()) {
        UChar32 c = s.char32At(i);
        bool space = u_isUWhiteSpace(c);
        if (space && start >= 0) {
            tokens.push_back(normalize_ustring(icu::UnicodeString(s, start, i - start)));
            start = -1;
        } else if (!space && start < 0) {
            start = i;
        }
        i += U16_LENGTH(c);
    }
    if (start >= 0) {
        tokens.push_back(normalize_ustring(icu::UnicodeString(s, start)));
    }
    return tokens;
}

std::u32string to_scalars(std::string_view utf8)
{
    std::u32string out;
    out.reserve(utf8.size());
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(utf8.data());
    const auto length = static_cast<std::int32_t>(utf8.size());
    std::int32_t i = 0;
    while (i < length) {
        UChar32 c;
        std::int32_t at = i;
        U8_NEXT(bytes, i, length, c);
        if (c < 0) {
            throw Error(ErrorKind::Parse, "invalid UTF-8 at byte " + std::to_string(at));
        }
        out.push_back(static_cast<char32_t>(c));
    }
    return out;
}

}  // namespace shotsearch::text
