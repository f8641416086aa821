#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bri2d
{
/*!
 * Flat key-value text: "key = value" lines, "#" starts a comment, blank
 * lines ignored. Later keys override earlier ones.
 */
class KeyValues
{
  public:
    static KeyValues parse(std::istream& is, std::string const& source = "<input>")
    {
        KeyValues kv;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line))
        {
            ++lineno;
            if (auto h = line.find('#'); h != std::string::npos)
            {
                line.erase(h);
            }
            line = trim(line);
            if (line.empty())
            {
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos)
            {
                throw std::invalid_argument(source + ":" + std::to_string(lineno)
                                            + ": expected key = value");
            }
            auto key = trim(line.substr(0, eq));
            if (key.empty())
            {
                throw std::invalid_argument(source + ":" + std::to_string(lineno)
                                            + ": empty key");
            }
            kv.values_[key] = trim(line.substr(eq + 1));
        }
        return kv;
    }

    static KeyValues parse_string(std::string const& text)
    {
        std::istringstream is(text);
        return parse(is);
    }

    static KeyValues load(std::string const& path)
    {
        std::ifstream is(path);
        if (!is)
        {
            throw std::invalid_argument("cannot open config " + path);
        }
        return parse(is, path);
    }

    bool has(std::string const& k) const { return values_.count(k) > 0; }
    void set(std::string const& k, std::string const& v) { values_[k] = v; }
    std::map<std::string, std::string> const& values() const { return values_; }

    std::string get(std::string const& k, std::string const& fallback) const
    {
        auto it = values_.find(k);
        return it == values_.end() ? fallback : it->second;
    }

    double number(std::string const& k, double fallback) const
    {
        auto it = values_.find(k);
        return it == values_.end() ? fallback : to_number(k, it->second);
    }

    double number(std::string const& k) const
    {
        return to_number(k, this->require(k));
    }

    std::vector<double> list(std::string const& k,
                             std::vector<double> fallback) const
    {
        auto it = values_.find(k);
        if (it == values_.end())
        {
            return fallback;
        }
        std::vector<double> out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ','))
        {
            out.push_back(to_number(k, trim(item)));
        }
        if (out.empty())
        {
            throw std::invalid_argument("config key " + k + ": empty list");
        }
        return out;
    }

    std::vector<double> list(std::string const& k) const
    {
        this->require(k);
        return this->list(k, {});
    }

    bool flag(std::string const& k, bool fallback) const
    {
        auto it = values_.find(k);
        if (it == values_.end())
        {
            return fallback;
        }
        if (it->second == "true" || it->second == "1" || it->second == "yes")
        {
            return true;
        }
        if (it->second == "false" || it->second == "0" || it->second == "no")
        {
            return false;
        }
        throw std::invalid_argument("config key " + k + ": expected a boolean");
    }

  private:
    std::map<std::string, std::string> values_;

    std::string const& require(std::string const& k) const
    {
        auto it = values_.find(k);
        if (it == values_.end())
        {
            throw std::invalid_argument("missing config key " + k);
        }
        return it->second;
    }

    static std::string trim(std::string s)
    {
        auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos)
        {
            return {};
        }
        auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static double to_number(std::string const& k, std::string const& v)
    {
        // Accept e and e^p shorthands for powers of Euler's number
        if (v == "e")
        {
            return std::numbers::e;
        }
        if (v.rfind("e^", 0) == 0)
        {
            return std::exp(to_number(k, v.substr(2)));
        }
        std::size_t used = 0;
        double out = 0;
        try
        {
            out = std::stod(v, &used);
        }
        catch (std::exception const&)
        {
            used = 0;
        }
        if (used == 0 || used != v.size())
        {
            throw std::invalid_argument("config key " + k + ": not a number: " + v);
        }
        return out;
    }
};

}  // namespace bri2d
