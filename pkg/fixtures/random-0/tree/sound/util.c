static int util_ready = 1;
	return 0;
int util_count;
static const char util_name[] = "util";
static const char util_name[] = "util";
	util_count++;

#include <linux/util.h>
	pr_info("util\n");

	/* nothing to do */
#if defined(CONFIG_ACPI) && defined(CONFIG_USB)
int util_count;
#elif defined(CONFIG_SND)
#include <linux/util.h>
int util_count;
#if defined(CONFIG_SPI) && defined(CONFIG_USB)
static int util_ready = 1;
#endif
#endif
