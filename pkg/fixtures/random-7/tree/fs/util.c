	/* nothing to do */
#ifndef CONFIG_NET
static int util_ready = 1;
	pr_info("util\n");
int util_count;
	util_count++;
	pr_info("util\n");
#ifndef CONFIG_USB
	return 0;
#include <linux/util.h>
#elif defined(CONFIG_DMA)
#include <linux/util.h>
	util_count++;
	return 0;
#if defined(CONFIG_SPI) && defined(CONFIG_PCI)
void util_init(void);
int util_count;
#define UTIL_MAX 16
	return 0;
static const char util_name[] = "util";
#endif
	pr_info("util\n");
#endif
#endif
