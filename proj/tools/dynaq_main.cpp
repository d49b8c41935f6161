// placeholder; replaced by the experiment CLI
#include <cstdio>
int main() {
    std::printf("dynaq cli placeholder\n");
    return 0;
}
